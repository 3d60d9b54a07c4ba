#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "colflux/errors.hpp"
#include "colflux/numerics.hpp"
#include "colflux/prior.hpp"

namespace colflux {

enum class Scenario {
  validate,
  simulate,
  eigen,
  weights,
  gains,
  assimilate,
  oracle_check,
  blind,
  compare_altitude,
};

inline constexpr Scenario kAllScenarios[] = {
    Scenario::validate, Scenario::simulate,     Scenario::eigen,
    Scenario::weights,  Scenario::gains,        Scenario::assimilate,
    Scenario::oracle_check, Scenario::blind,    Scenario::compare_altitude};

inline const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::validate: return "validate";
    case Scenario::simulate: return "simulate";
    case Scenario::eigen: return "eigen";
    case Scenario::weights: return "weights";
    case Scenario::gains: return "gains";
    case Scenario::assimilate: return "assimilate";
    case Scenario::oracle_check: return "oracle_check";
    case Scenario::blind: return "blind";
    case Scenario::compare_altitude: return "compare_altitude";
  }
  return "validate";
}

inline std::optional<Scenario> scenario_from_string(const std::string& name) {
  for (Scenario s : kAllScenarios) {
    if (name == to_string(s)) return s;
  }
  return std::nullopt;
}

/// A scalar function of z on [0, h] or of t on [0, t_end].
///   constant: value
///   linear:   value + slope * x
///   sine:     amplitude * sin(pi * cycles * x / length)
///   cosine:   value + amplitude * cos(pi * cycles * x / length)
///   gaussian: value + amplitude * exp(-(x - center)^2 / (2 width^2))
///   samples:  one value per node
struct FunctionSpec {
  std::string kind = "constant";
  double value = 0.0;
  double slope = 0.0;
  double amplitude = 0.0;
  double cycles = 1.0;
  double center = 0.0;
  double width = 1.0;
  std::vector<double> samples;

  bool operator==(const FunctionSpec&) const = default;

  static FunctionSpec constant(double v) {
    FunctionSpec s;
    s.value = v;
    return s;
  }

  double at(double x, double length) const {
    if (kind == "constant") return value;
    if (kind == "linear") return value + slope * x;
    if (kind == "sine") return amplitude * std::sin(std::numbers::pi * cycles * x / length);
    if (kind == "cosine") return value + amplitude * std::cos(std::numbers::pi * cycles * x / length);
    if (kind == "gaussian") {
      const double d = (x - center) / width;
      return value + amplitude * std::exp(-0.5 * d * d);
    }
    throw ArgumentError("FunctionSpec: kind '" + kind + "' has no pointwise formula");
  }

  template <typename Tag>
  std::vector<double> sample(const UniformGrid<Tag>& grid) const {
    if (kind == "samples") {
      if (samples.size() != grid.size()) {
        throw ArgumentError("samples: expected " + std::to_string(grid.size()) + " values, got " +
                            std::to_string(samples.size()));
      }
      return samples;
    }
    std::vector<double> out(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) out[i] = at(grid.node(i), grid.length());
    // sin(pi) is not exactly zero in floating point
    if (kind == "sine" && std::abs(cycles - std::round(cycles)) == 0.0) out.back() = 0.0;
    return out;
  }
};

/// An observation weight: a builtin label or a named function of z.
/// Builtins: rho_plus, rho_minus (first two adjoint modes), uniform (1/h),
/// surface (1 - z/h), top (z/h).
struct WeightSpec {
  std::string label;
  bool builtin = true;
  FunctionSpec function;

  bool operator==(const WeightSpec&) const = default;
};

inline const std::set<std::string>& builtin_weight_labels() {
  static const std::set<std::string> labels{"rho_plus", "rho_minus", "uniform", "surface", "top"};
  return labels;
}

struct ExperimentConfig {
  Scenario scenario = Scenario::validate;
  std::uint64_t seed = 0;
  std::string output = "out";

  struct Model {
    double h = 1.0;
    FunctionSpec k = FunctionSpec::constant(1.0);
    FunctionSpec w = FunctionSpec::constant(0.0);
    double max_second_difference = 1e6;
    bool operator==(const Model&) const = default;
  } model;

  struct Grid {
    std::size_t nz = 1001;
    /// number of time steps; the time grid has nt + 1 nodes
    std::size_t nt = 1024;
    double t_end = 1.0;
    bool operator==(const Grid&) const = default;
  } grid;

  struct Spectral {
    std::size_t n_modes = 32;
    bool operator==(const Spectral&) const = default;
  } spectral;

  struct Prior {
    PriorKind kind = PriorKind::dirichlet;
    double sigma = 1.0;
    FunctionSpec mean = FunctionSpec::constant(0.0);
    bool operator==(const Prior&) const = default;
  } prior;

  struct Observations {
    std::vector<double> times;
    std::vector<WeightSpec> weights;
    std::vector<double> noise;
    /// optional CSV of t,y,r replacing synthetic data (relative to the config file)
    std::string file;
    bool operator==(const Observations&) const = default;
  } observations;

  /// true flux used to synthesise data and drive `simulate`
  FunctionSpec truth = FunctionSpec::constant(0.0);
  /// initial mixing ratio q0(z)
  FunctionSpec initial = FunctionSpec::constant(0.0);

  struct Simulate {
    /// write every `stride`-th time slice to the field CSV
    std::size_t stride = 1;
    bool operator==(const Simulate&) const = default;
  } simulate;

  struct Blind {
    std::size_t exponentials = 20;
    std::size_t test_weights = 50;
    /// parabola t(T - t), or sine sin(3 pi t / T)
    std::string seed_function = "parabola";
    /// observation time; 0 means t_end
    double t_obs = 0.0;
    bool operator==(const Blind&) const = default;
  } blind;

  struct Compare {
    /// observation time; 0 means t_end
    double t_obs = 0.0;
    bool operator==(const Compare&) const = default;
  } compare;

  struct Oracle {
    std::size_t test_functions = 10;
    bool operator==(const Oracle&) const = default;
  } oracle;

  bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

using nlohmann::json;

/// Walks one JSON object, remembering which keys were consumed so unknown
/// keys can be rejected with their JSON pointer.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "/" : path_, "expected an object");
  }

  std::string child(const std::string& key) const { return path_ + "/" + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(child(key), "expected a number");
      out = v->get<double>();
      if (!std::isfinite(out)) throw ConfigError(child(key), "must be finite");
    }
  }

  void count(const std::string& key, std::size_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer() || v->get<long long>() < 0) {
        throw ConfigError(child(key), "expected a non-negative integer");
      }
      out = v->get<std::size_t>();
    }
  }

  void text(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(child(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  void numbers(const std::string& key, std::vector<double>& out) {
    if (const json* v = find(key)) {
      if (v->is_number()) {
        out = {v->get<double>()};
        return;
      }
      if (!v->is_array()) throw ConfigError(child(key), "expected an array of numbers");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        if (!(*v)[i].is_number()) {
          throw ConfigError(child(key) + "/" + std::to_string(i), "expected a number");
        }
        out.push_back((*v)[i].get<double>());
      }
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(child(it.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

/// Parameters that apply to each function kind; anything else is rejected.
inline const std::set<std::string>& function_keys(const std::string& kind) {
  static const std::set<std::string> constant{"value"}, linear{"value", "slope"},
      sine{"amplitude", "cycles"}, cosine{"value", "amplitude", "cycles"},
      gaussian{"value", "amplitude", "center", "width"}, samples{"samples"}, none;
  if (kind == "constant") return constant;
  if (kind == "linear") return linear;
  if (kind == "sine") return sine;
  if (kind == "cosine") return cosine;
  if (kind == "gaussian") return gaussian;
  if (kind == "samples") return samples;
  return none;
}

inline FunctionSpec parse_function(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  FunctionSpec s;
  r.text("kind", s.kind);
  static const std::set<std::string> kinds{"constant", "linear", "sine", "cosine", "gaussian", "samples"};
  if (!kinds.count(s.kind)) throw ConfigError(r.child("kind"), "unknown function kind '" + s.kind + "'");
  const std::set<std::string>& keys = function_keys(s.kind);
  if (keys.count("value")) r.number("value", s.value);
  if (keys.count("slope")) r.number("slope", s.slope);
  if (keys.count("amplitude")) r.number("amplitude", s.amplitude);
  if (keys.count("cycles")) r.number("cycles", s.cycles);
  if (keys.count("center")) r.number("center", s.center);
  if (keys.count("width")) r.number("width", s.width);
  if (keys.count("samples")) r.numbers("samples", s.samples);
  if (s.kind == "samples" && s.samples.empty()) throw ConfigError(r.child("samples"), "required for kind 'samples'");
  if (s.kind == "gaussian" && !(s.width > 0.0)) throw ConfigError(r.child("width"), "must be positive");
  r.finish();
  return s;
}

inline json function_to_json(const FunctionSpec& s) {
  json j;
  j["kind"] = s.kind;
  const auto& keys = function_keys(s.kind);
  if (keys.count("value")) j["value"] = s.value;
  if (keys.count("slope")) j["slope"] = s.slope;
  if (keys.count("amplitude")) j["amplitude"] = s.amplitude;
  if (keys.count("cycles")) j["cycles"] = s.cycles;
  if (keys.count("center")) j["center"] = s.center;
  if (keys.count("width")) j["width"] = s.width;
  if (keys.count("samples")) j["samples"] = s.samples;
  return j;
}

/// Lower bound of k over [0, h] for the closed-form kinds.
inline std::optional<double> spec_minimum(const FunctionSpec& s, double length) {
  if (s.kind == "constant") return s.value;
  if (s.kind == "linear") return std::min(s.value, s.value + s.slope * length);
  if (s.kind == "cosine") return s.value - std::abs(s.amplitude);
  if (s.kind == "gaussian") return s.value + std::min(0.0, s.amplitude);
  if (s.kind == "samples" && !s.samples.empty()) {
    return *std::min_element(s.samples.begin(), s.samples.end());
  }
  return std::nullopt;
}

inline std::optional<PriorKind> prior_kind_from_string(const std::string& s) {
  if (s == "dirichlet") return PriorKind::dirichlet;
  if (s == "periodic") return PriorKind::periodic;
  if (s == "diagonal") return PriorKind::diagonal;
  return std::nullopt;
}

}  // namespace detail

/// Parses and validates a configuration document. Missing keys take their
/// defaults; unknown keys are rejected with the JSON pointer of the key.
inline ExperimentConfig parse_config(const std::string& text) {
  using detail::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("/", std::string("invalid JSON: ") + e.what());
  }
  ExperimentConfig c;
  detail::ObjectReader top(doc, "");

  std::string scenario = to_string(c.scenario);
  top.text("scenario", scenario);
  const auto sc = scenario_from_string(scenario);
  if (!sc) throw ConfigError("/scenario", "unknown scenario '" + scenario + "'");
  c.scenario = *sc;

  if (const json* v = top.find("seed")) {
    if (!v->is_number_unsigned()) throw ConfigError("/seed", "expected a non-negative integer");
    c.seed = v->get<std::uint64_t>();
  }
  top.text("output", c.output);

  if (const json* v = top.find("model")) {
    detail::ObjectReader r(*v, "/model");
    r.number("h", c.model.h);
    if (!(c.model.h > 0.0)) throw ConfigError("/model/h", "column height must be positive");
    if (const json* k = r.find("k")) c.model.k = detail::parse_function(*k, "/model/k");
    if (const json* w = r.find("w")) c.model.w = detail::parse_function(*w, "/model/w");
    r.number("max_second_difference", c.model.max_second_difference);
    r.finish();
  }
  if (const auto kmin = detail::spec_minimum(c.model.k, c.model.h); kmin && !(*kmin > 0.0)) {
    const std::string where = c.model.k.kind == "samples" ? "/model/k/samples" : "/model/k/value";
    throw ConfigError(where, "assumption A2 violated: k(z) must be positive (min " +
                                 std::to_string(*kmin) + ")");
  }

  if (const json* v = top.find("grid")) {
    detail::ObjectReader r(*v, "/grid");
    r.count("nz", c.grid.nz);
    r.count("nt", c.grid.nt);
    r.number("t_end", c.grid.t_end);
    r.finish();
  }
  if (c.grid.nz < 3) throw ConfigError("/grid/nz", "at least 3 column nodes required");
  if (c.grid.nt < 1) throw ConfigError("/grid/nt", "at least one time step required");
  if (!(c.grid.t_end > 0.0)) throw ConfigError("/grid/t_end", "must be positive");

  if (const json* v = top.find("spectral")) {
    detail::ObjectReader r(*v, "/spectral");
    r.count("n_modes", c.spectral.n_modes);
    r.finish();
  }
  if (c.spectral.n_modes < 2) throw ConfigError("/spectral/n_modes", "at least 2 modes required");

  if (const json* v = top.find("prior")) {
    detail::ObjectReader r(*v, "/prior");
    std::string kind = to_string(c.prior.kind);
    r.text("kind", kind);
    const auto pk = detail::prior_kind_from_string(kind);
    if (!pk) throw ConfigError("/prior/kind", "expected dirichlet, periodic or diagonal");
    c.prior.kind = *pk;
    r.number("sigma", c.prior.sigma);
    if (!(c.prior.sigma > 0.0)) throw ConfigError("/prior/sigma", "must be positive");
    if (const json* m = r.find("mean")) c.prior.mean = detail::parse_function(*m, "/prior/mean");
    r.finish();
  }

  if (const json* v = top.find("observations")) {
    detail::ObjectReader r(*v, "/observations");
    r.numbers("times", c.observations.times);
    r.numbers("noise", c.observations.noise);
    r.text("file", c.observations.file);
    if (const json* ws = r.find("weights")) {
      if (!ws->is_array()) throw ConfigError("/observations/weights", "expected an array");
      for (std::size_t i = 0; i < ws->size(); ++i) {
        const std::string path = "/observations/weights/" + std::to_string(i);
        const json& e = (*ws)[i];
        WeightSpec spec;
        if (e.is_string()) {
          spec.label = e.get<std::string>();
          if (!builtin_weight_labels().count(spec.label)) {
            throw ConfigError(path, "unknown weight label '" + spec.label + "'");
          }
        } else {
          detail::ObjectReader wr(e, path);
          wr.text("label", spec.label);
          if (spec.label.empty()) throw ConfigError(path + "/label", "required");
          const json* f = wr.find("function");
          if (!f) throw ConfigError(path + "/function", "required");
          spec.builtin = false;
          spec.function = detail::parse_function(*f, path + "/function");
          wr.finish();
        }
        c.observations.weights.push_back(std::move(spec));
      }
    }
    r.finish();
    auto& o = c.observations;
    if (o.file.empty()) {
      for (std::size_t i = 0; i < o.times.size(); ++i) {
        if (!(o.times[i] > 0.0) || o.times[i] > c.grid.t_end * (1.0 + 1e-12)) {
          throw ConfigError("/observations/times/" + std::to_string(i), "must lie in (0, t_end]");
        }
        if (i > 0 && !(o.times[i] > o.times[i - 1])) {
          throw ConfigError("/observations/times/" + std::to_string(i), "times must increase strictly");
        }
      }
      if (!o.times.empty() && o.weights.size() != 1 && o.weights.size() != o.times.size()) {
        throw ConfigError("/observations/weights", "need one weight, or one per observation time");
      }
      if (o.noise.size() > 1 && o.noise.size() != o.times.size()) {
        throw ConfigError("/observations/noise", "need one noise level, or one per observation time");
      }
    } else if (o.weights.empty()) {
      throw ConfigError("/observations/weights", "required");
    }
    for (std::size_t i = 0; i < o.noise.size(); ++i) {
      if (!(o.noise[i] >= 0.0)) {
        throw ConfigError("/observations/noise/" + std::to_string(i), "must be non-negative");
      }
    }
  }

  if (const json* v = top.find("truth")) c.truth = detail::parse_function(*v, "/truth");
  if (const json* v = top.find("initial")) c.initial = detail::parse_function(*v, "/initial");

  if (const json* v = top.find("simulate")) {
    detail::ObjectReader r(*v, "/simulate");
    r.count("stride", c.simulate.stride);
    if (c.simulate.stride == 0) throw ConfigError("/simulate/stride", "must be positive");
    r.finish();
  }
  if (const json* v = top.find("blind")) {
    detail::ObjectReader r(*v, "/blind");
    r.count("exponentials", c.blind.exponentials);
    r.count("test_weights", c.blind.test_weights);
    r.text("seed_function", c.blind.seed_function);
    if (c.blind.seed_function != "parabola" && c.blind.seed_function != "sine") {
      throw ConfigError("/blind/seed_function", "expected parabola or sine");
    }
    r.number("t_obs", c.blind.t_obs);
    r.finish();
  }
  if (const json* v = top.find("compare")) {
    detail::ObjectReader r(*v, "/compare");
    r.number("t_obs", c.compare.t_obs);
    r.finish();
  }
  if (const json* v = top.find("oracle")) {
    detail::ObjectReader r(*v, "/oracle");
    r.count("test_functions", c.oracle.test_functions);
    r.finish();
  }
  top.finish();

  const bool needs_obs = c.scenario == Scenario::gains || c.scenario == Scenario::assimilate ||
                         c.scenario == Scenario::oracle_check;
  if (needs_obs && c.observations.times.empty() && c.observations.file.empty()) {
    throw ConfigError("/observations", "scenario '" + std::string(to_string(c.scenario)) +
                                           "' requires observation times");
  }
  return c;
}

/// Canonical JSON form with every default spelled out; parse_config(to_json(c)) == c.
inline nlohmann::json to_json(const ExperimentConfig& c) {
  using detail::json;
  json j;
  j["scenario"] = to_string(c.scenario);
  j["seed"] = c.seed;
  j["output"] = c.output;
  j["model"] = {{"h", c.model.h},
                {"k", detail::function_to_json(c.model.k)},
                {"w", detail::function_to_json(c.model.w)},
                {"max_second_difference", c.model.max_second_difference}};
  j["grid"] = {{"nz", c.grid.nz}, {"nt", c.grid.nt}, {"t_end", c.grid.t_end}};
  j["spectral"] = {{"n_modes", c.spectral.n_modes}};
  j["prior"] = {{"kind", to_string(c.prior.kind)},
                {"sigma", c.prior.sigma},
                {"mean", detail::function_to_json(c.prior.mean)}};
  json weights = json::array();
  for (const auto& w : c.observations.weights) {
    if (w.builtin) {
      weights.push_back(w.label);
    } else {
      weights.push_back({{"label", w.label}, {"function", detail::function_to_json(w.function)}});
    }
  }
  j["observations"] = {{"times", c.observations.times},
                       {"weights", weights},
                       {"noise", c.observations.noise},
                       {"file", c.observations.file}};
  j["truth"] = detail::function_to_json(c.truth);
  j["initial"] = detail::function_to_json(c.initial);
  j["simulate"] = {{"stride", c.simulate.stride}};
  j["blind"] = {{"exponentials", c.blind.exponentials},
                {"test_weights", c.blind.test_weights},
                {"seed_function", c.blind.seed_function},
                {"t_obs", c.blind.t_obs}};
  j["compare"] = {{"t_obs", c.compare.t_obs}};
  j["oracle"] = {{"test_functions", c.oracle.test_functions}};
  return j;
}

}  // namespace colflux
