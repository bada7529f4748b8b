// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <limits>
#include <queue>
#include <random>
#include <thread>
#include <vector>

#include "msq/error.hpp"
#include "msq/measures.hpp"
#include "msq/model.hpp"
#include "msq/patience.hpp"
#include "msq/phasetype.hpp"

namespace msq {

struct SimSpec {
  QueueScenario scenario;
  int replications = 20;
  double horizon = 1e5;
  double warmup_fraction = 0.1;
  std::uint64_t seed = 1;
  std::vector<int> tail_levels;
  unsigned threads = 0;  ///< 0 = hardware concurrency
};

/// Whole-run counters of one replication (warmup included).
struct ReplicationCounters {
  std::uint64_t arrivals = 0;
  std::uint64_t departures = 0;
  std::uint64_t abandonments = 0;
  std::uint64_t in_system = 0;  ///< at the horizon
  std::uint64_t patience_violations = 0;
  std::uint64_t events = 0;
};

struct ReplicationResult {
  ReplicationCounters counters;
  double mean_queue_length = 0.0;
  double mean_idle_servers = 0.0;
  double abandonment_fraction = 0.0;
  std::vector<double> tail;  ///< aligned with SimSpec::tail_levels
};

struct SimResult {
  PerformanceReport report;  ///< replication means, std_error = sample sd / sqrt(R)
  std::vector<ReplicationResult> replications;
};

namespace detail {

struct SimEvent {
  double time;
  int kind;  ///< 0 arrival, 1 phase end (id = server), 2 patience expiry (id = queue seq)
  std::uint64_t id;
  bool operator>(const SimEvent& o) const { return time > o.time; }
};

struct Waiting {
  double arrival;
  double patience;
  bool gone;  ///< abandoned; removed lazily
};

inline ReplicationResult run_replication(const SimSpec& spec, int rep) {
  const QueueScenario& sc = spec.scenario;
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(rep)};
  std::mt19937_64 rng(seq);
  InterarrivalSampler next_gap(sc.arrivals, sc.lambda);
  const PhaseTypeSampler service(sc.service);
  const bool patient = !has_patience(sc.patience);

  const double t_end = spec.horizon;
  const double t_warm = spec.warmup_fraction * spec.horizon;
  std::priority_queue<SimEvent, std::vector<SimEvent>, std::greater<>> calendar;
  std::vector<int> phase(static_cast<std::size_t>(sc.n), -1);
  std::vector<int> free_servers(static_cast<std::size_t>(sc.n));
  for (int s = 0; s < sc.n; ++s) free_servers[static_cast<std::size_t>(s)] = sc.n - 1 - s;
  std::deque<Waiting> queue;
  std::uint64_t head_seq = 0;  ///< seq of queue.front()
  std::uint64_t waiting = 0;   ///< live customers in queue

  ReplicationResult out;
  auto& c = out.counters;
  std::vector<double> occupancy;  ///< time spent at N = k within the window
  std::uint64_t window_arrivals = 0;
  std::uint64_t window_abandons = 0;

  double now = 0.0;
  auto advance = [&](double t) {
    const double a = std::max(now, t_warm);
    if (t > a) {
      const std::size_t k = static_cast<std::size_t>(sc.n - static_cast<int>(free_servers.size())) + waiting;
      if (occupancy.size() <= k) occupancy.resize(k + 1, 0.0);
      occupancy[k] += t - a;
    }
    now = t;
  };
  auto start_service = [&](int server) {
    const int j = service.initial_phase(rng);
    phase[static_cast<std::size_t>(server)] = j;
    calendar.push({now + service.holding_time(j, rng), 1, static_cast<std::uint64_t>(server)});
  };

  const double first = next_gap(rng);
  if (first < t_end) calendar.push({first, 0, 0});
  while (!calendar.empty() && calendar.top().time < t_end) {
    const SimEvent ev = calendar.top();
    calendar.pop();
    advance(ev.time);
    ++c.events;
    if (ev.kind == 0) {
      ++c.arrivals;
      if (now >= t_warm) ++window_arrivals;
      const double gap = next_gap(rng);
      if (now + gap < t_end) calendar.push({now + gap, 0, 0});
      if (!free_servers.empty()) {
        const int s = free_servers.back();
        free_servers.pop_back();
        start_service(s);
      } else {
        const double pt = patient ? std::numeric_limits<double>::infinity() : sample_patience(sc.patience, rng);
        const std::uint64_t my_seq = head_seq + queue.size();
        queue.push_back({now, pt, false});
        ++waiting;
        if (std::isfinite(pt) && now + pt < t_end) calendar.push({now + pt, 2, my_seq});
      }
    } else if (ev.kind == 1) {
      const auto s = static_cast<std::size_t>(ev.id);
      const int nxt = service.next_phase(phase[s], rng);
      if (nxt >= 0) {
        phase[s] = nxt;
        calendar.push({now + service.holding_time(nxt, rng), 1, ev.id});
        continue;
      }
      ++c.departures;
      phase[s] = -1;
      while (!queue.empty() && queue.front().gone) {
        queue.pop_front();
        ++head_seq;
      }
      if (queue.empty()) {
        free_servers.push_back(static_cast<int>(s));
      } else {
        const Waiting w = queue.front();
        queue.pop_front();
        ++head_seq;
        --waiting;
        if (now - w.arrival > w.patience) ++c.patience_violations;  // should have left already
        start_service(static_cast<int>(s));
      }
    } else {
      if (ev.id < head_seq) continue;  // already in service
      Waiting& w = queue[static_cast<std::size_t>(ev.id - head_seq)];
      if (w.gone) continue;
      if (w.patience > now - w.arrival + 1e-9 * std::max(1.0, now)) ++c.patience_violations;
      w.gone = true;
      --waiting;
      ++c.abandonments;
      if (now >= t_warm) ++window_abandons;
    }
  }
  advance(t_end);
  c.in_system = static_cast<std::uint64_t>(sc.n - static_cast<int>(free_servers.size())) + waiting;

  const double span = t_end - t_warm;
  double queue_len = 0.0;
  double idle = 0.0;
  for (std::size_t k = 0; k < occupancy.size(); ++k) {
    const double f = occupancy[k] / span;
    const int ik = static_cast<int>(k);
    if (ik > sc.n) queue_len += (ik - sc.n) * f;
    else idle += (sc.n - ik) * f;
  }
  if (occupancy.empty()) idle = sc.n;
  out.mean_queue_length = queue_len;
  out.mean_idle_servers = idle;
  out.abandonment_fraction =
      window_arrivals == 0 ? 0.0 : static_cast<double>(window_abandons) / static_cast<double>(window_arrivals);
  for (int l : spec.tail_levels) {
    double above = 0.0;
    for (std::size_t k = static_cast<std::size_t>(std::max(l + 1, 0)); k < occupancy.size(); ++k) above += occupancy[k];
    out.tail.push_back(above / span);
  }
  return out;
}

inline void mean_and_error(const std::vector<double>& xs, double& mean, double& se) {
  const double r = static_cast<double>(xs.size());
  mean = 0.0;
  for (double x : xs) mean += x;
  mean /= r;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  se = xs.size() > 1 ? std::sqrt(ss / (r - 1.0) / r) : kNoValue;
}

}  // namespace detail

/// Replications run concurrently; the merge is by replication index so the
/// result does not depend on the thread count.
inline SimResult simulate(const SimSpec& spec) {
  require(spec.replications >= 2, "simulate: need at least 2 replications for confidence intervals");
  require(spec.horizon > 0.0, "simulate: horizon must be > 0");
  require(spec.warmup_fraction >= 0.0 && spec.warmup_fraction < 1.0, "simulate: warmup fraction must be in [0, 1)");
  for (int l : spec.tail_levels) require(l >= 0, "simulate: tail level must be >= 0");

  SimResult res;
  res.replications.resize(static_cast<std::size_t>(spec.replications));
  unsigned workers = spec.threads ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(spec.replications));
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](unsigned w) {
    try {
      for (int r = next++; r < spec.replications; r = next++) {
        res.replications[static_cast<std::size_t>(r)] = detail::run_replication(spec, r);
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  auto& rep = res.report;
  auto collect = [&](auto get) {
    std::vector<double> xs;
    for (const auto& r : res.replications) xs.push_back(get(r));
    return xs;
  };
  double m = 0.0;
  double se = 0.0;
  detail::mean_and_error(collect([](const ReplicationResult& r) { return r.mean_queue_length; }), m, se);
  rep.mean_queue_length = m;
  rep.std_error["mean_queue_length"] = se;
  detail::mean_and_error(collect([](const ReplicationResult& r) { return r.mean_idle_servers; }), m, se);
  rep.mean_idle_servers = m;
  rep.std_error["mean_idle_servers"] = se;
  detail::mean_and_error(collect([](const ReplicationResult& r) { return r.abandonment_fraction; }), m, se);
  rep.abandonment_fraction = m;
  rep.std_error["abandonment_fraction"] = se;
  for (std::size_t i = 0; i < spec.tail_levels.size(); ++i) {
    detail::mean_and_error(collect([i](const ReplicationResult& r) { return r.tail[i]; }), m, se);
    rep.tail.emplace_back(spec.tail_levels[i], m);
    rep.std_error[tail_row_name(spec.tail_levels[i])] = se;
  }
  return res;
}

}  // namespace msq
