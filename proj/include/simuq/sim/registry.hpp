#pragma once

#include <memory>
#include <string>

#include "simuq/sim/bioprocess.hpp"
#include "simuq/sim/cell.hpp"
#include "simuq/sim/jackson.hpp"
#include "simuq/sim/simulator.hpp"
#include "simuq/sim/subprocess.hpp"
#include "simuq/sim/toy.hpp"

namespace simuq {

inline std::unique_ptr<simulator> make_simulator(
    const std::string& name, const json& params = json::object()) {
  if (name == "bioprocess") return std::make_unique<bioprocess_simulator>(params);
  if (name == "cell") return std::make_unique<cell_simulator>(params);
  if (name == "jackson") return std::make_unique<jackson_simulator>(params);
  if (name == "toy") return std::make_unique<toy_simulator>(params);
  if (name == "subprocess") return std::make_unique<subprocess_simulator>(params);
  throw config_error("UnknownSimulator", "no simulator named '" + name + "'");
}

}  // namespace simuq
