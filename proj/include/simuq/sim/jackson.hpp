#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <queue>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "simuq/errors.hpp"
#include "simuq/sim/simulator.hpp"

namespace simuq {

/// Open queueing network of single-server FCFS stations with probabilistic
/// routing, simulated by discrete-event simulation.
///
/// Input models, in moment-vector order:
///   arrival      gamma   interarrival times of the external stream
///   service_i    gamma   service times of station i (i = 1..S)
///   <p models>   bernoulli, one per probabilistic routing rule
///
/// Each station has one routing rule: either a fixed destination or a
/// two-way split driven by a bernoulli model (destination 0 means leaving
/// the network). The default topology is a 4-station network: external
/// arrivals (mean interarrival 0.25) enter station 1, which sends jobs to
/// station 2 w.p. p1 = 0.5 and otherwise to station 4; station 2 releases
/// w.p. p2 = 0.5, else to station 4; station 3 releases w.p. p3 = 0.75,
/// else to station 4; station 4 always feeds station 3. All service means
/// are 0.2, giving utilizations (0.8, 0.4, 0.8, 0.8) and a steady-state
/// mean number-in-system of 38/3.
///
/// The replication output is the time-average number in system over
/// [warmup, warmup + run_length]. Runs start loaded: station i begins with
/// initial_load[i] jobs (by default the rounded station means at the truth
/// moments). Unstable inputs still return finite outputs: the horizon is
/// finite and queues simply grow.
class jackson_simulator : public simulator {
 public:
  struct route {
    int from = 0;
    int p_index = -1;  ///< index into the bernoulli blocks; -1 = fixed
    int dest_true = 0;
    int dest_false = 0;
  };

  explicit jackson_simulator(const json& params = json::object()) {
    if (params.contains("stations") || params.contains("routes")) {
      stations_ = params.value("stations", 0);
      if (stations_ < 1)
        throw config_error("InvalidConfig", "need at least one station");
      if (!params.contains("routes"))
        throw config_error("InvalidConfig", "custom topology needs 'routes'");
      specs_.push_back({"arrival", family::gamma, 0.0, {}});
      for (int i = 1; i <= stations_; ++i)
        specs_.push_back(
            {"service_" + std::to_string(i), family::gamma, 0.0, {}});
      std::vector<bool> has_rule(stations_ + 1, false);
      for (const auto& rj : params.at("routes")) {
        route r;
        r.from = rj.at("from").get<int>();
        if (r.from < 1 || r.from > stations_)
          throw config_error("InvalidConfig", "route 'from' out of range");
        if (has_rule[r.from])
          throw config_error("InvalidConfig", "duplicate route for a station");
        has_rule[r.from] = true;
        if (rj.contains("p_model")) {
          r.p_index = static_cast<int>(routes_with_p_);
          ++routes_with_p_;
          specs_.push_back(
              {rj.at("p_model").get<std::string>(), family::bernoulli, 0.0, {}});
          r.dest_true = rj.at("if_true").get<int>();
          r.dest_false = rj.at("if_false").get<int>();
        } else {
          r.dest_true = r.dest_false = rj.at("to").get<int>();
        }
        check_dest(r.dest_true);
        check_dest(r.dest_false);
        routes_.push_back(r);
      }
      for (int i = 1; i <= stations_; ++i)
        if (!has_rule[i])
          throw config_error("InvalidConfig",
                             "station " + std::to_string(i) + " has no route");
    } else {
      stations_ = 4;
      routes_ = {{1, 0, 2, 4}, {2, 1, 0, 4}, {3, 2, 0, 4}, {4, -1, 3, 3}};
      routes_with_p_ = 3;
      specs_ = {
          {"arrival", family::gamma, 0.0, {0.25, 0.25}},
          {"service_1", family::gamma, 0.0, {0.2, 0.2}},
          {"service_2", family::gamma, 0.0, {0.2, 0.2}},
          {"service_3", family::gamma, 0.0, {0.2, 0.2}},
          {"service_4", family::gamma, 0.0, {0.2, 0.2}},
          {"p1", family::bernoulli, 0.0, {0.5}},
          {"p2", family::bernoulli, 0.0, {0.5}},
          {"p3", family::bernoulli, 0.0, {0.75}},
      };
    }
    arrival_station_ = params.value("arrival_station", 1);
    if (arrival_station_ < 1 || arrival_station_ > stations_)
      throw config_error("InvalidConfig", "arrival_station out of range");
    warmup_ = params.value("warmup", 200.0);
    run_length_ = params.value("run_length", 20.0);
    if (warmup_ < 0.0 || run_length_ <= 0.0)
      throw config_error("InvalidConfig", "bad warmup/run_length");

    if (params.contains("truth"))
      for (auto& s : specs_)
        if (params.at("truth").contains(s.model_id))
          s.truth = params.at("truth").at(s.model_id).get<std::vector<double>>();

    if (params.contains("initial_load")) {
      initial_load_ = params.at("initial_load").get<std::vector<int>>();
      if (static_cast<int>(initial_load_.size()) != stations_)
        throw config_error("InvalidConfig", "initial_load length mismatch");
    } else {
      initial_load_.assign(stations_, 0);
      // Start loaded at the rounded analytic station means, when the truth
      // moments are available and stable.
      try {
        const auto rho = utilizations(truth());
        bool stable = true;
        for (double r : rho) stable = stable && r < 1.0;
        if (stable)
          for (int i = 0; i < stations_; ++i)
            initial_load_[i] =
                static_cast<int>(std::lround(rho[i] / (1.0 - rho[i])));
      } catch (const error&) {
        // no usable truth; start empty
      }
    }
  }

  const std::vector<model_spec>& models() const override { return specs_; }

  /// Station utilizations at moment vector x from the traffic equations
  /// lambda = lambda_ext + R' lambda (rates depend only on the block means).
  std::vector<double> utilizations(const std::vector<double>& x) const {
    check_input(x, 1);
    const auto lay = block_layout::from(specs_);
    const double mean_ia = x[lay.blocks[0].offset];
    if (!(mean_ia > 0.0))
      throw numeric_error("InvalidMoments", "interarrival mean must be > 0");

    Eigen::MatrixXd routing = Eigen::MatrixXd::Zero(stations_, stations_);
    for (const auto& r : routes_) {
      const double p =
          r.p_index >= 0
              ? x[lay.blocks[1 + stations_ + r.p_index].offset]
              : 1.0;
      if (r.dest_true > 0) routing(r.from - 1, r.dest_true - 1) += p;
      if (r.dest_false > 0 && r.p_index >= 0)
        routing(r.from - 1, r.dest_false - 1) += 1.0 - p;
    }
    Eigen::VectorXd ext = Eigen::VectorXd::Zero(stations_);
    ext(arrival_station_ - 1) = 1.0 / mean_ia;

    const Eigen::MatrixXd a =
        Eigen::MatrixXd::Identity(stations_, stations_) - routing.transpose();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible())
      throw numeric_error("Unstable", "traffic equations are singular");
    const Eigen::VectorXd lambda = lu.solve(ext);

    std::vector<double> rho(stations_);
    for (int i = 0; i < stations_; ++i) {
      const double mean_svc = x[lay.blocks[1 + i].offset];
      if (!(mean_svc > 0.0))
        throw numeric_error("InvalidMoments", "service mean must be > 0");
      rho[i] = lambda(i) * mean_svc;
    }
    return rho;
  }

  /// True when the network is stable at x: the traffic equations solve and
  /// every utilization is below 1. Depends only on the mean coordinates.
  bool stable(const std::vector<double>& x) const {
    try {
      for (double r : utilizations(x))
        if (!(r < 1.0)) return false;
      return true;
    } catch (const error&) {
      return false;
    }
  }

  /// Exact steady-state mean number in system, sum of rho_i / (1 - rho_i).
  /// Requires every gamma block to have shape 1 (exponential times, i.e.
  /// mean equal to std); errors otherwise, and errors when unstable.
  double analytic_mean(const std::vector<double>& x) const {
    check_input(x, 1);
    const auto lay = block_layout::from(specs_);
    for (int b = 0; b <= stations_; ++b) {
      const double mean = x[lay.blocks[b].offset];
      const double sd = x[lay.blocks[b].offset + 1];
      if (std::abs(mean - sd) > 1e-6 * std::max(1.0, std::abs(mean)))
        throw numeric_error(
            "InvalidMoments",
            "analytic value requires exponential (shape-1) time blocks; '" +
                lay.blocks[b].model_id + "' has mean != std");
    }
    double total = 0.0;
    for (double r : utilizations(x)) {
      if (!(r < 1.0))
        throw numeric_error("Unstable", "a station has utilization >= 1");
      total += r / (1.0 - r);
    }
    return total;
  }

  std::vector<double> simulate(const std::vector<double>& x, int n,
                               std::uint64_t seed) const override {
    check_input(x, n);
    const auto lay = block_layout::from(specs_);
    // Natural parameters once per call.
    const auto ia = natural_from_moments(family::gamma,
                                         x.data() + lay.blocks[0].offset);
    std::vector<std::array<double, 2>> svc(stations_);
    for (int i = 0; i < stations_; ++i) {
      const auto nat = natural_from_moments(
          family::gamma, x.data() + lay.blocks[1 + i].offset);
      svc[i] = {nat[0], nat[1]};
    }
    std::vector<double> probs(routes_with_p_);
    for (int i = 0; i < static_cast<int>(routes_with_p_); ++i)
      probs[i] = x[lay.blocks[1 + stations_ + i].offset];
    std::vector<const route*> rule(stations_ + 1, nullptr);
    for (const auto& r : routes_) rule[r.from] = &r;

    std::vector<double> out(n);
    for (int j = 0; j < n; ++j)
      out[j] = one_run(ia, svc, probs, rule,
                       mix64(seed, static_cast<std::uint64_t>(j)));
    return out;
  }

  int station_count() const { return stations_; }
  const std::vector<int>& initial_load() const { return initial_load_; }

 private:
  void check_dest(int dest) const {
    if (dest < 0 || dest > stations_)
      throw config_error("InvalidConfig", "route destination out of range");
  }

  double one_run(const std::vector<double>& ia,
                 const std::vector<std::array<double, 2>>& svc,
                 const std::vector<double>& probs,
                 const std::vector<const route*>& rule,
                 std::uint64_t run_seed) const {
    rng stream(run_seed);
    enum { ev_arrival = 0, ev_completion = 1 };
    using event = std::tuple<double, std::uint64_t, int, int>;  // time, seq, type, station
    std::priority_queue<event, std::vector<event>, std::greater<event>> pq;
    std::uint64_t seq = 0;

    std::vector<int> count(stations_ + 1, 0);
    int total = 0;
    auto svc_draw = [&](int s) {
      return stream.gamma(svc[s - 1][0], svc[s - 1][1]);
    };

    for (int s = 1; s <= stations_; ++s) {
      count[s] = initial_load_[s - 1];
      total += count[s];
      if (count[s] > 0) pq.emplace(svc_draw(s), seq++, ev_completion, s);
    }
    pq.emplace(stream.gamma(ia[0], ia[1]), seq++, ev_arrival, arrival_station_);

    const double t_end = warmup_ + run_length_;
    double t = 0.0;
    double area = 0.0;
    auto integrate_to = [&](double tn) {
      const double lo = std::max(t, warmup_);
      const double hi = std::min(tn, t_end);
      if (hi > lo) area += (hi - lo) * total;
      t = tn;
    };
    auto enqueue = [&](int s, double now) {
      ++count[s];
      ++total;
      if (count[s] == 1) pq.emplace(now + svc_draw(s), seq++, ev_completion, s);
    };

    while (true) {
      const auto [ev_time, ev_seq, ev_type, ev_station] = pq.top();
      pq.pop();
      if (ev_time >= t_end) {
        integrate_to(t_end);
        break;
      }
      integrate_to(ev_time);
      if (ev_type == ev_arrival) {
        enqueue(ev_station, ev_time);
        pq.emplace(ev_time + stream.gamma(ia[0], ia[1]), seq++, ev_arrival,
                   arrival_station_);
      } else {
        --count[ev_station];
        --total;
        if (count[ev_station] > 0)
          pq.emplace(ev_time + svc_draw(ev_station), seq++, ev_completion,
                     ev_station);
        const route* r = rule[ev_station];
        const int dest = r->p_index >= 0
                             ? (stream.bernoulli(probs[r->p_index])
                                    ? r->dest_true
                                    : r->dest_false)
                             : r->dest_true;
        if (dest > 0) enqueue(dest, ev_time);
      }
    }
    return area / run_length_;
  }

  int stations_ = 0;
  int arrival_station_ = 1;
  double warmup_ = 200.0;
  double run_length_ = 20.0;
  std::vector<route> routes_;
  std::size_t routes_with_p_ = 0;
  std::vector<model_spec> specs_;
  std::vector<int> initial_load_;
};

}  // namespace simuq
