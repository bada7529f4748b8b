// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "msq/error.hpp"
#include "msq/model.hpp"
#include "msq/quadrature.hpp"
#include "msq/patience.hpp"
#include "msq/phasetype.hpp"
#include "msq/refdensity.hpp"

namespace msq {

enum class ReferenceKind { Standard, Naive };

struct MeshConfig {
  double element_size = 0.5;
  std::vector<int> counts;  ///< overrides element_size when non-empty
  std::optional<TruncationBox> box;  ///< auto box from epsilon0 when absent
  double auto_max_lower = -7.0;      ///< the auto box's lower edge is at most this
};

struct DensityGridConfig {
  double step = 0.5;
};

struct OutputConfig {
  std::vector<int> tail_levels;
  std::optional<std::pair<int, int>> pmf_range;
  std::optional<DensityGridConfig> density_grid;
};

struct QbdConfig {
  bool enabled = false;
  int cap_offset = 2000;
};

struct SimulationConfig {
  int replications = 20;
  double horizon = 1e5;
  double warmup_fraction = 0.1;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

/// One experiment. Defaults: 8-point assembly, 64-point tail rule,
/// epsilon0 = 1e-7, 0.5 elements, 20 replications of 1e5 time units.
struct RunConfig {
  std::string name;
  QueueScenario scenario;
  ModelKind model = ModelKind::DensityAtZero;
  ReferenceKind reference = ReferenceKind::Standard;
  ReferenceOptions reference_options;
  MeshConfig mesh;
  double epsilon0 = 1e-7;
  int assembly_order = 8;
  int tail_order = 64;
  CutRule cut_rule = CutRule::Indicator;
  OutputConfig outputs;
  QbdConfig qbd;
  SimulationConfig simulation;
};

namespace detail {

using nlohmann::json;

/// JSON view that remembers its pointer path for error messages and rejects
/// unknown keys.
class ConfigNode {
 public:
  ConfigNode(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  [[nodiscard]] const std::string& path() const { return path_; }
  [[nodiscard]] const json& raw() const { return j_; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw InvalidInput("config " + (path_.empty() ? std::string("/") : path_) + ": " + msg);
  }

  void expect_object(std::initializer_list<const char*> allowed) const {
    if (!j_.is_object()) fail("expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j_.items()) {
      if (!ok.count(k)) ConfigNode(v, path_ + "/" + k).fail("unknown key");
    }
  }

  [[nodiscard]] bool has(const char* key) const { return j_.contains(key); }

  [[nodiscard]] ConfigNode at(const char* key) const {
    if (!j_.contains(key)) fail(std::string("missing key '") + key + "'");
    return {j_.at(key), path_ + "/" + key};
  }

  template <class T>
  T as() const {
    try {
      return j_.get<T>();
    } catch (const json::exception& e) {
      fail(std::string("wrong type (") + e.what() + ")");
    }
  }

  template <class T>
  T get(const char* key) const {
    return at(key).template as<T>();
  }

  template <class T>
  T get_or(const char* key, T fallback) const {
    return has(key) ? get<T>(key) : fallback;
  }

  /// Runs f and rethrows module errors prefixed with this path.
  template <class F>
  auto guard(F&& f) const {
    try {
      return f();
    } catch (const InvalidInput& e) {
      fail(e.what());
    }
  }

 private:
  const json& j_;
  std::string path_;
};

inline Eigen::VectorXd to_vector(const ConfigNode& node) {
  const auto v = node.as<std::vector<double>>();
  if (v.empty()) node.fail("expected a nonempty array");
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline ArrivalProcess parse_arrivals(const ConfigNode& node) {
  const auto family = node.get<std::string>("family");
  ArrivalProcess a;
  if (family == "poisson") {
    node.expect_object({"family"});
    a = PoissonArrivals{};
  } else if (family == "erlang") {
    node.expect_object({"family", "k"});
    a = ErlangArrivals{node.get<int>("k")};
  } else if (family == "hyperexponential") {
    node.expect_object({"family", "p", "rates"});
    a = HyperexponentialArrivals{node.get<std::vector<double>>("p"), node.get<std::vector<double>>("rates")};
  } else {
    node.at("family").fail("unknown arrival family '" + family + "'");
  }
  node.guard([&] {
    validate(a);
    return 0;
  });
  return a;
}

inline PhaseTypeDistribution parse_service(const ConfigNode& node) {
  node.expect_object({"p", "rates", "routing", "mean"});
  const Eigen::VectorXd p = to_vector(node.at("p"));
  const Eigen::VectorXd nu = to_vector(node.at("rates"));
  if (p.size() != nu.size()) node.at("rates").fail("length must match /p");
  PhaseTypeDistribution pt{p, nu, Eigen::MatrixXd::Zero(p.size(), p.size())};
  if (node.has("routing")) {
    const auto rows = node.get<std::vector<std::vector<double>>>("routing");
    if (static_cast<Eigen::Index>(rows.size()) != p.size()) node.at("routing").fail("must be d x d");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (static_cast<Eigen::Index>(rows[i].size()) != p.size()) node.at("routing").fail("must be d x d");
      for (std::size_t l = 0; l < rows[i].size(); ++l) {
        pt.P(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) = rows[i][l];
      }
    }
  }
  node.guard([&] {
    pt.validate();
    return 0;
  });
  if (node.has("mean")) {
    const double m = node.get<double>("mean");
    pt = node.at("mean").guard([&] { return with_mean(pt, m); });
  }
  return pt;
}

inline PatienceModel parse_patience(const ConfigNode& node) {
  const auto family = node.get<std::string>("family");
  PatienceModel pm;
  if (family == "none") {
    node.expect_object({"family"});
    pm = NoPatience{};
  } else if (family == "exponential") {
    node.expect_object({"family", "rate"});
    pm = ExponentialPatience{node.get<double>("rate")};
  } else if (family == "erlang") {
    node.expect_object({"family", "k", "theta"});
    pm = ErlangPatience{node.get<int>("k"), node.get<double>("theta")};
  } else if (family == "hyperexponential") {
    node.expect_object({"family", "p", "rates"});
    const auto p = node.get<std::vector<double>>("p");
    const auto r = node.get<std::vector<double>>("rates");
    if (p.size() != 2 || r.size() != 2) node.fail("hyperexponential patience needs exactly two phases");
    pm = HyperexponentialPatience{{p[0], p[1]}, {r[0], r[1]}};
  } else {
    node.at("family").fail("unknown patience family '" + family + "'");
  }
  node.guard([&] {
    validate(pm);
    return 0;
  });
  return pm;
}

inline TruncationBox parse_box(const ConfigNode& node, int d) {
  node.expect_object({"lower", "upper"});
  TruncationBox b;
  auto side = [&](const char* key) {
    const auto n = node.at(key);
    std::vector<double> v;
    if (n.raw().is_number()) {
      v.assign(static_cast<std::size_t>(d), n.as<double>());
    } else {
      v = n.as<std::vector<double>>();
    }
    if (static_cast<int>(v.size()) != d) n.fail("needs one entry per dimension (or a scalar)");
    return v;
  };
  b.lower = side("lower");
  b.upper = side("upper");
  for (int j = 0; j < d; ++j) {
    if (!(b.lower[static_cast<std::size_t>(j)] < b.upper[static_cast<std::size_t>(j)])) node.fail("lower must be < upper");
  }
  return b;
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
  using detail::ConfigNode;
  const ConfigNode root(j, "");
  root.expect_object({"name", "scenario", "model", "reference", "mesh", "epsilon0", "quadrature", "outputs", "qbd",
                      "simulation"});
  RunConfig cfg;
  cfg.name = root.get_or<std::string>("name", "run");

  const auto sc = root.at("scenario");
  sc.expect_object({"servers", "arrival_rate", "arrivals", "service", "patience"});
  const int n = sc.get<int>("servers");
  const double lambda = sc.get<double>("arrival_rate");
  const ArrivalProcess arrivals =
      sc.has("arrivals") ? detail::parse_arrivals(sc.at("arrivals")) : ArrivalProcess{PoissonArrivals{}};
  const PhaseTypeDistribution service = detail::parse_service(sc.at("service"));
  const PatienceModel patience = sc.has("patience") ? detail::parse_patience(sc.at("patience")) : PatienceModel{};
  cfg.scenario = sc.guard([&] { return QueueScenario::make(n, lambda, arrivals, service, patience); });
  const int d = cfg.scenario.dimension();

  if (root.has("model")) {
    const auto m = root.get<std::string>("model");
    if (m == "density_at_zero") {
      cfg.model = ModelKind::DensityAtZero;
    } else if (m == "hazard_rate") {
      cfg.model = ModelKind::HazardRate;
    } else {
      root.at("model").fail("expected 'density_at_zero' or 'hazard_rate'");
    }
  }

  if (root.has("reference")) {
    const auto r = root.at("reference");
    r.expect_object({"kind", "steepness_factor", "hazard_derivative", "erlang3_scale", "auxiliary_rate"});
    const auto kind = r.get_or<std::string>("kind", "standard");
    if (kind == "standard") {
      cfg.reference = ReferenceKind::Standard;
    } else if (kind == "naive") {
      cfg.reference = ReferenceKind::Naive;
    } else {
      r.at("kind").fail("expected 'standard' or 'naive'");
    }
    auto& o = cfg.reference_options;
    o.steepness_factor = r.get_or("steepness_factor", o.steepness_factor);
    if (!(o.steepness_factor > 0.0)) r.at("steepness_factor").fail("must be > 0");
    if (r.has("hazard_derivative")) o.hazard_derivative = r.get<double>("hazard_derivative");
    o.erlang3_scale = r.get_or("erlang3_scale", o.erlang3_scale);
    if (!(o.erlang3_scale > 0.0)) r.at("erlang3_scale").fail("must be > 0");
    if (r.has("auxiliary_rate")) {
      o.auxiliary_rate = r.get<double>("auxiliary_rate");
      if (!(*o.auxiliary_rate > 0.0)) r.at("auxiliary_rate").fail("must be > 0");
    }
  }

  if (root.has("mesh")) {
    const auto m = root.at("mesh");
    m.expect_object({"element_size", "counts", "box", "auto_max_lower"});
    cfg.mesh.auto_max_lower = m.get_or("auto_max_lower", cfg.mesh.auto_max_lower);
    cfg.mesh.element_size = m.get_or("element_size", cfg.mesh.element_size);
    if (!(cfg.mesh.element_size > 0.0)) m.at("element_size").fail("must be > 0");
    if (m.has("counts")) {
      cfg.mesh.counts = m.get<std::vector<int>>("counts");
      if (static_cast<int>(cfg.mesh.counts.size()) != d) m.at("counts").fail("needs one entry per dimension");
      for (int c : cfg.mesh.counts) {
        if (c < 1) m.at("counts").fail("entries must be >= 1");
      }
    }
    if (m.has("box")) cfg.mesh.box = detail::parse_box(m.at("box"), d);
  }

  cfg.epsilon0 = root.get_or("epsilon0", cfg.epsilon0);
  if (!(cfg.epsilon0 > 0.0 && cfg.epsilon0 < 1.0)) root.at("epsilon0").fail("must be in (0, 1)");

  if (root.has("quadrature")) {
    const auto q = root.at("quadrature");
    q.expect_object({"assembly", "tail", "cut_rule"});
    cfg.assembly_order = q.get_or("assembly", cfg.assembly_order);
    cfg.tail_order = q.get_or("tail", cfg.tail_order);
    const auto rule = q.get_or<std::string>("cut_rule", "indicator");
    if (rule == "indicator") {
      cfg.cut_rule = CutRule::Indicator;
    } else if (rule == "split") {
      cfg.cut_rule = CutRule::Split;
    } else {
      q.at("cut_rule").fail("expected 'indicator' or 'split'");
    }
    if (cfg.assembly_order < 1) q.at("assembly").fail("must be >= 1");
    if (cfg.tail_order < 1) q.at("tail").fail("must be >= 1");
  }

  if (root.has("outputs")) {
    const auto o = root.at("outputs");
    o.expect_object({"tail_levels", "pmf_range", "density_grid"});
    cfg.outputs.tail_levels = o.get_or<std::vector<int>>("tail_levels", {});
    for (int l : cfg.outputs.tail_levels) {
      if (l < 0) o.at("tail_levels").fail("levels must be >= 0");
    }
    if (o.has("pmf_range")) {
      const auto r = o.get<std::vector<int>>("pmf_range");
      if (r.size() != 2 || r[0] < 0 || r[1] < r[0]) o.at("pmf_range").fail("expected [first, last] with 0 <= first <= last");
      cfg.outputs.pmf_range = std::make_pair(r[0], r[1]);
    }
    if (o.has("density_grid")) {
      const auto g = o.at("density_grid");
      g.expect_object({"step"});
      DensityGridConfig dg;
      dg.step = g.get_or("step", dg.step);
      if (!(dg.step > 0.0)) g.at("step").fail("must be > 0");
      cfg.outputs.density_grid = dg;
    }
  }

  if (root.has("qbd")) {
    const auto q = root.at("qbd");
    q.expect_object({"enabled", "cap_offset"});
    cfg.qbd.enabled = q.get_or("enabled", true);
    cfg.qbd.cap_offset = q.get_or("cap_offset", cfg.qbd.cap_offset);
    if (cfg.qbd.cap_offset < 1) q.at("cap_offset").fail("must be >= 1");
  }

  if (root.has("simulation")) {
    const auto s = root.at("simulation");
    s.expect_object({"replications", "horizon", "warmup_fraction", "seed", "threads"});
    auto& sim = cfg.simulation;
    sim.replications = s.get_or("replications", sim.replications);
    sim.horizon = s.get_or("horizon", sim.horizon);
    sim.warmup_fraction = s.get_or("warmup_fraction", sim.warmup_fraction);
    sim.seed = s.get_or("seed", sim.seed);
    sim.threads = s.get_or("threads", sim.threads);
    if (sim.replications < 2) s.at("replications").fail("must be >= 2");
    if (!(sim.horizon > 0.0)) s.at("horizon").fail("must be > 0");
    if (!(sim.warmup_fraction >= 0.0 && sim.warmup_fraction < 1.0)) s.at("warmup_fraction").fail("must be in [0, 1)");
  }
  return cfg;
}

inline RunConfig load_config(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw InvalidInput("config: cannot open '" + file + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput("config: " + file + ": " + e.what());
  }
  try {
    return parse_config(j);
  } catch (const InvalidInput& e) {
    throw InvalidInput(file + ": " + e.what());
  }
}

}  // namespace msq
