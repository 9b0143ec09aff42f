#pragma once

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdint>
#include <cstring>
#include <sstream>
#include <string>
#include <vector>

#include "simuq/errors.hpp"
#include "simuq/sim/simulator.hpp"

namespace simuq {

/// Out-of-process simulator plug-in.
///
/// Each simulate() call spawns `command` (via /bin/sh -c), writes one JSON
/// request to its stdin
///   {"moments": {"<model_id>": [block values...], ...},
///    "n": <replications>, "seed": <seed>}
/// closes the pipe, and reads n whitespace-separated replication outputs
/// from its stdout. The child owns its randomness; it is expected to honor
/// the seed so reruns stay reproducible. A nonzero exit status or a short /
/// malformed reply raises numeric_error("PluginFailed").
///
/// params: {"command": "...", "models": [model spec...]}
class subprocess_simulator : public simulator {
 public:
  explicit subprocess_simulator(const json& params) {
    if (!params.contains("command") || !params.contains("models"))
      throw config_error("InvalidConfig",
                         "subprocess simulator needs 'command' and 'models'");
    command_ = params.at("command").get<std::string>();
    specs_ = models_from_json(params.at("models"));
  }

  const std::vector<model_spec>& models() const override { return specs_; }

  std::vector<double> simulate(const std::vector<double>& x, int n,
                               std::uint64_t seed) const override {
    check_input(x, n);
    const auto lay = block_layout::from(specs_);
    json req;
    json blocks = json::object();
    for (const auto& b : lay.blocks) {
      if (b.dim == 0) continue;
      blocks[b.model_id] = std::vector<double>(x.begin() + b.offset,
                                               x.begin() + b.offset + b.dim);
    }
    req["moments"] = blocks;
    req["n"] = n;
    req["seed"] = seed;
    const std::string reply = run_child(req.dump() + "\n");

    std::vector<double> out;
    out.reserve(n);
    std::istringstream in(reply);
    double v;
    while (in >> v) out.push_back(v);
    if (static_cast<int>(out.size()) != n)
      throw numeric_error("PluginFailed",
                          "plug-in returned " + std::to_string(out.size()) +
                              " values, expected " + std::to_string(n));
    return out;
  }

 private:
  std::string run_child(const std::string& input) const {
    int to_child[2], from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0)
      throw numeric_error("PluginFailed", "pipe() failed");
    const pid_t pid = fork();
    if (pid < 0) throw numeric_error("PluginFailed", "fork() failed");
    if (pid == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      close(to_child[0]);
      close(to_child[1]);
      close(from_child[0]);
      close(from_child[1]);
      execl("/bin/sh", "sh", "-c", command_.c_str(), (char*)nullptr);
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);

    // Requests are small (well under the pipe buffer), so write-then-read
    // cannot deadlock.
    const char* data = input.data();
    std::size_t left = input.size();
    while (left > 0) {
      const ssize_t w = write(to_child[1], data, left);
      if (w <= 0) break;
      data += w;
      left -= static_cast<std::size_t>(w);
    }
    close(to_child[1]);

    std::string reply;
    char buf[4096];
    ssize_t r;
    while ((r = read(from_child[0], buf, sizeof(buf))) > 0)
      reply.append(buf, static_cast<std::size_t>(r));
    close(from_child[0]);

    int status = 0;
    waitpid(pid, &status, 0);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
      throw numeric_error("PluginFailed",
                          "plug-in command exited with an error");
    return reply;
  }

  std::string command_;
  std::vector<model_spec> specs_;
};

}  // namespace simuq
