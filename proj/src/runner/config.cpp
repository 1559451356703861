#include <rfl/runner/config.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace rfl::runner {

using nlohmann::json;

Scenario scenario_from_string(const std::string& s) {
  if (s == "sparsity_convergence") return Scenario::sparsity_convergence;
  if (s == "selection_vs_gamma") return Scenario::selection_vs_gamma;
  if (s == "selection_vs_epsilon") return Scenario::selection_vs_epsilon;
  if (s == "fl_training") return Scenario::fl_training;
  if (s == "oracle_validation") return Scenario::oracle_validation;
  throw ConfigError("unknown scenario '" + s + "'");
}

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::sparsity_convergence: return "sparsity_convergence";
    case Scenario::selection_vs_gamma: return "selection_vs_gamma";
    case Scenario::selection_vs_epsilon: return "selection_vs_epsilon";
    case Scenario::fl_training: return "fl_training";
    case Scenario::oracle_validation: return "oracle_validation";
  }
  return "?";
}

ConfigParseError::ConfigParseError(const std::string& source, int line, const std::string& msg)
    : std::runtime_error(source + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + msg),
      line(line) {}

namespace {

int line_at(const std::string& text, std::size_t pos) {
  pos = std::min(pos, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

// Walks the text looking for each key of the path in turn. Good enough for
// hand-written configs; falls back to the last match found.
int locate(const std::string& text, const std::vector<std::string>& path) {
  std::size_t pos = 0;
  int line = 0;
  for (const auto& key : path) {
    const std::string quoted = "\"" + key + "\"";
    std::size_t p = pos;
    for (;;) {
      p = text.find(quoted, p);
      if (p == std::string::npos) return line;
      std::size_t q = p + quoted.size();
      while (q < text.size() && std::isspace(static_cast<unsigned char>(text[q]))) ++q;
      if (q < text.size() && text[q] == ':') break;
      p += quoted.size();
    }
    pos = p + quoted.size();
    line = line_at(text, p);
  }
  return line;
}

class Reader {
 public:
  Reader(const std::string& text, std::string source) : text_(text), source_(std::move(source)) {}

  [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& msg) const {
    std::string dotted;
    for (const auto& k : path) dotted += (dotted.empty() ? "" : ".") + k;
    throw ConfigParseError(source_, locate(text_, path), dotted.empty() ? msg : dotted + ": " + msg);
  }

  void only_keys(const json& obj, const std::vector<std::string>& path, const std::set<std::string>& allowed) const {
    if (!obj.is_object()) fail(path, "expected an object");
    for (const auto& [k, v] : obj.items()) {
      (void)v;
      if (!allowed.count(k)) {
        auto p = path;
        p.push_back(k);
        fail(p, "unknown key");
      }
    }
  }

  template <typename T>
  void get(const json& obj, std::vector<std::string> path, const std::string& key, T& out) const {
    if (!obj.contains(key)) return;
    path.push_back(key);
    const json& v = obj.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(path, "expected a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(path, "expected a string");
      out = v.get<std::string>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(path, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned()) {
          out = v.get<T>();
        } else {
          if (v.get<long long>() < 0) fail(path, "expected a nonnegative integer");
          out = static_cast<T>(v.get<long long>());
        }
      } else {
        out = v.get<T>();
      }
    } else {
      if (!v.is_number()) fail(path, "expected a number");
      out = v.get<T>();
    }
  }

  template <typename T>
  void get_list(const json& obj, std::vector<std::string> path, const std::string& key, std::vector<T>& out) const {
    if (!obj.contains(key)) return;
    path.push_back(key);
    const json& v = obj.at(key);
    if (!v.is_array()) fail(path, "expected an array");
    if (v.empty()) fail(path, "grid axis is empty");
    out.clear();
    for (const auto& e : v) {
      if constexpr (std::is_same_v<T, std::string>) {
        if (!e.is_string()) fail(path, "expected strings");
        out.push_back(e.get<std::string>());
      } else {
        if (!e.is_number()) fail(path, "expected numbers");
        out.push_back(e.get<T>());
      }
    }
  }

  template <typename F>
  void convert(const json& obj, std::vector<std::string> path, const std::string& key, F&& f) const {
    if (!obj.contains(key)) return;
    path.push_back(key);
    const json& v = obj.at(key);
    if (!v.is_string()) fail(path, "expected a string");
    try {
      f(v.get<std::string>());
    } catch (const ConfigError& e) {
      fail(path, e.what());
    }
  }

  void check(bool ok, const std::vector<std::string>& path, const std::string& msg) const {
    if (!ok) fail(path, msg);
  }

 private:
  const std::string& text_;
  std::string source_;
};

void apply_profile(ExperimentConfig& cfg) {
  if (cfg.profile == "paper") {
    cfg.base.num_antennas = 48;
    cfg.base.num_devices = 20;
  } else if (cfg.profile == "desk") {
    cfg.base.num_antennas = 16;
    cfg.base.num_devices = 8;
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
    throw ConfigParseError(source, line_at(text, byte), "syntax error: " + std::string(e.what()));
  }
  const Reader rd(text, source);
  rd.only_keys(root, {}, {"scenario", "profile", "seed", "num_realizations", "output_dir", "base", "selection",
                          "grid", "fl"});

  ExperimentConfig cfg;
  if (!root.contains("scenario")) rd.fail({}, "missing 'scenario'");
  rd.convert(root, {}, "scenario", [&](const std::string& s) { cfg.scenario = scenario_from_string(s); });
  rd.get(root, {}, "profile", cfg.profile);
  rd.check(cfg.profile == "paper" || cfg.profile == "desk", {"profile"}, "expected 'paper' or 'desk'");
  apply_profile(cfg);
  rd.get(root, {}, "seed", cfg.seed);
  rd.get(root, {}, "num_realizations", cfg.num_realizations);
  rd.check(cfg.num_realizations >= 1, {"num_realizations"}, "must be >= 1");
  rd.get(root, {}, "output_dir", cfg.output_dir);

  if (root.contains("base")) {
    const json& b = root["base"];
    const std::vector<std::string> p{"base"};
    rd.only_keys(b, p, {"num_antennas", "num_devices", "epsilon", "snr_bs_db", "snr_dev_db", "gamma_b_db",
                        "gamma_d_db", "cell_radius_km", "min_distance_km", "gain_offset_db", "relative_radii",
                        "noise_dl", "noise_ul"});
    auto& B = cfg.base;
    rd.get(b, p, "num_antennas", B.num_antennas);
    rd.get(b, p, "num_devices", B.num_devices);
    rd.get(b, p, "epsilon", B.epsilon);
    rd.get(b, p, "snr_bs_db", B.db.snr_bs_db);
    rd.get(b, p, "snr_dev_db", B.db.snr_dev_db);
    rd.get(b, p, "gamma_b_db", B.db.gamma_b_db);
    rd.get(b, p, "gamma_d_db", B.db.gamma_d_db);
    rd.get(b, p, "cell_radius_km", B.geometry.cell_radius_km);
    rd.get(b, p, "min_distance_km", B.geometry.min_distance_km);
    rd.get(b, p, "gain_offset_db", B.geometry.gain_offset_db);
    rd.get(b, p, "relative_radii", B.geometry.relative_radii);
    rd.get(b, p, "noise_dl", B.noise_dl);
    rd.get(b, p, "noise_ul", B.noise_ul);
  }
  {
    const auto& B = cfg.base;
    rd.check(B.num_antennas >= 1, {"base", "num_antennas"}, "must be >= 1");
    rd.check(B.num_devices >= 1, {"base", "num_devices"}, "must be >= 1");
    rd.check(B.epsilon >= 0.0, {"base", "epsilon"}, "must be >= 0");
    rd.check(B.geometry.min_distance_km > 0.0 && B.geometry.min_distance_km < B.geometry.cell_radius_km,
             {"base", "min_distance_km"}, "must lie in (0, cell_radius_km)");
    rd.check(B.noise_dl > 0.0 && B.noise_ul > 0.0, {"base"}, "noise powers must be positive");
  }

  if (root.contains("selection")) {
    const json& s = root["selection"];
    const std::vector<std::string> p{"selection"};
    rd.only_keys(s, p, {"nu1", "nu2", "max_ao_iters", "solver_tol", "solver_max_iterations", "binary_search",
                        "force_lmi"});
    auto& S = cfg.selection;
    rd.get(s, p, "nu1", S.nu1);
    rd.get(s, p, "nu2", S.nu2);
    rd.get(s, p, "max_ao_iters", S.max_ao_iters);
    rd.get(s, p, "solver_tol", S.solver_tol);
    rd.get(s, p, "solver_max_iterations", S.solver_max_iterations);
    rd.get(s, p, "binary_search", S.binary_search);
    rd.get(s, p, "force_lmi", S.force_lmi);
    rd.check(S.nu1 > 0 && S.nu2 > 0, p, "nu1 and nu2 must be positive");
    rd.check(S.max_ao_iters >= 1, {"selection", "max_ao_iters"}, "must be >= 1");
    rd.check(S.solver_tol > 0, {"selection", "solver_tol"}, "must be positive");
    rd.check(S.solver_max_iterations >= 1, {"selection", "solver_max_iterations"}, "must be >= 1");
  }

  if (root.contains("grid")) {
    const json& g = root["grid"];
    const std::vector<std::string> p{"grid"};
    rd.only_keys(g, p, {"gamma_b_db", "gamma_d_db", "epsilon", "design"});
    if (g.empty()) rd.fail(p, "grid is empty");
    rd.get_list(g, p, "gamma_b_db", cfg.grid.gamma_b_db);
    rd.get_list(g, p, "gamma_d_db", cfg.grid.gamma_d_db);
    rd.get_list(g, p, "epsilon", cfg.grid.epsilon);
    rd.get_list(g, p, "design", cfg.grid.design);
    for (double e : cfg.grid.epsilon) rd.check(e >= 0.0, {"grid", "epsilon"}, "must be >= 0");
    for (const auto& d : cfg.grid.design)
      rd.check(d == "robust" || d == "nonrobust" || d == "ideal" || d == "manual", {"grid", "design"},
               "unknown design '" + d + "'");
  }
  if (cfg.scenario == Scenario::selection_vs_gamma)
    rd.check(!cfg.grid.gamma_b_db.empty() || !cfg.grid.gamma_d_db.empty(), {"grid"},
             "selection_vs_gamma needs a gamma_b_db or gamma_d_db axis");
  if (cfg.scenario == Scenario::selection_vs_epsilon)
    rd.check(!cfg.grid.epsilon.empty(), {"grid"}, "selection_vs_epsilon needs an epsilon axis");
  if (cfg.scenario != Scenario::fl_training)
    rd.check(cfg.grid.design.empty(), {"grid", "design"}, "only used by fl_training");
  if (cfg.scenario == Scenario::oracle_validation)
    rd.check(cfg.base.num_devices <= 10, {"base", "num_devices"}, "oracle_validation supports at most 10 devices");

  if (root.contains("fl")) {
    const json& f = root["fl"];
    const std::vector<std::string> p{"fl"};
    rd.only_keys(f, p, {"rounds", "learning_rate", "local_epochs", "local_steps", "batch_size", "partition", "model",
                        "hidden", "dataset", "samples", "test_samples", "features", "classes", "separation",
                        "mnist_dir", "mnist_train_limit", "mnist_test_limit", "true_epsilon",
                        "realized_distortion", "manual_broadcast_var", "manual_aggregation_var"});
    auto& F = cfg.fl;
    rd.get(f, p, "rounds", F.train.rounds);
    rd.get(f, p, "learning_rate", F.train.learning_rate);
    rd.get(f, p, "local_epochs", F.train.local_epochs);
    rd.get(f, p, "local_steps", F.train.local_steps);
    rd.get(f, p, "batch_size", F.train.batch_size);
    rd.convert(f, p, "partition", [&](const std::string& s) { F.train.partition = fl::partition_from_string(s); });
    rd.convert(f, p, "model", [&](const std::string& s) { F.train.model = fl::model_kind_from_string(s); });
    rd.get(f, p, "hidden", F.train.hidden);
    rd.convert(f, p, "dataset", [&](const std::string& s) { F.train.dataset = fl::dataset_kind_from_string(s); });
    rd.get(f, p, "samples", F.samples);
    rd.get(f, p, "test_samples", F.test_samples);
    rd.get(f, p, "features", F.features);
    rd.get(f, p, "classes", F.classes);
    rd.get(f, p, "separation", F.separation);
    rd.get(f, p, "mnist_dir", F.mnist_dir);
    rd.get(f, p, "mnist_train_limit", F.mnist_train_limit);
    rd.get(f, p, "mnist_test_limit", F.mnist_test_limit);
    rd.get(f, p, "true_epsilon", F.true_epsilon);
    rd.get(f, p, "realized_distortion", F.realized_distortion);
    rd.get(f, p, "manual_broadcast_var", F.manual_broadcast_var);
    rd.get(f, p, "manual_aggregation_var", F.manual_aggregation_var);
  }
  cfg.fl.train.num_devices = cfg.base.num_devices;
  if (cfg.scenario == Scenario::fl_training) {
    const auto& F = cfg.fl;
    try {
      F.train.validate();
    } catch (const ConfigError& e) {
      rd.fail({"fl"}, e.what());
    }
    rd.check(F.samples >= cfg.base.num_devices, {"fl", "samples"}, "fewer samples than devices");
    rd.check(F.test_samples >= 1, {"fl", "test_samples"}, "must be >= 1");
    rd.check(F.features >= 1 && F.classes >= 2, {"fl"}, "need features >= 1 and classes >= 2");
    rd.check(F.manual_broadcast_var >= 0 && F.manual_aggregation_var >= 0, {"fl"}, "variances must be >= 0");
    rd.check(F.train.dataset == fl::DatasetKind::synthetic_blobs || !F.mnist_dir.empty(), {"fl", "dataset"},
             "MNIST datasets need fl.mnist_dir");
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigParseError(path, 0, "cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::vector<GridPoint> expand_grid(const ExperimentConfig& cfg) {
  auto axis = [](const std::vector<double>& v, double base) { return v.empty() ? std::vector<double>{base} : v; };
  const auto gb = axis(cfg.grid.gamma_b_db, cfg.base.db.gamma_b_db);
  const auto gd = axis(cfg.grid.gamma_d_db, cfg.base.db.gamma_d_db);
  const auto ep = axis(cfg.grid.epsilon, cfg.base.epsilon);
  std::vector<std::string> ds = cfg.grid.design;
  if (ds.empty()) ds.push_back(cfg.scenario == Scenario::fl_training ? "robust" : "");
  std::vector<GridPoint> out;
  for (double b : gb)
    for (double d : gd)
      for (double e : ep)
        for (const auto& name : ds) {
          GridPoint p;
          p.index = static_cast<int>(out.size());
          p.gamma_b_db = b;
          p.gamma_d_db = d;
          p.epsilon = e;
          p.design = name;
          out.push_back(p);
        }
  return out;
}

json canonical_json(const ExperimentConfig& cfg) {
  const auto& B = cfg.base;
  const auto& S = cfg.selection;
  const auto& F = cfg.fl;
  json j;
  j["scenario"] = to_string(cfg.scenario);
  j["profile"] = cfg.profile;
  j["seed"] = cfg.seed;
  j["num_realizations"] = cfg.num_realizations;
  j["base"] = {{"num_antennas", B.num_antennas},
               {"num_devices", B.num_devices},
               {"epsilon", B.epsilon},
               {"snr_bs_db", B.db.snr_bs_db},
               {"snr_dev_db", B.db.snr_dev_db},
               {"gamma_b_db", B.db.gamma_b_db},
               {"gamma_d_db", B.db.gamma_d_db},
               {"cell_radius_km", B.geometry.cell_radius_km},
               {"min_distance_km", B.geometry.min_distance_km},
               {"gain_offset_db", B.geometry.gain_offset_db},
               {"relative_radii", B.geometry.relative_radii},
               {"noise_dl", B.noise_dl},
               {"noise_ul", B.noise_ul}};
  j["selection"] = {{"nu1", S.nu1},
                    {"nu2", S.nu2},
                    {"max_ao_iters", S.max_ao_iters},
                    {"solver_tol", S.solver_tol},
                    {"solver_max_iterations", S.solver_max_iterations},
                    {"binary_search", S.binary_search},
                    {"force_lmi", S.force_lmi}};
  j["grid"] = {{"gamma_b_db", cfg.grid.gamma_b_db},
               {"gamma_d_db", cfg.grid.gamma_d_db},
               {"epsilon", cfg.grid.epsilon},
               {"design", cfg.grid.design}};
  if (cfg.scenario == Scenario::fl_training)
    j["fl"] = {{"rounds", F.train.rounds},
               {"learning_rate", F.train.learning_rate},
               {"local_epochs", F.train.local_epochs},
               {"local_steps", F.train.local_steps},
               {"batch_size", F.train.batch_size},
               {"partition", fl::to_string(F.train.partition)},
               {"model", fl::to_string(F.train.model)},
               {"hidden", F.train.hidden},
               {"dataset", fl::to_string(F.train.dataset)},
               {"samples", F.samples},
               {"test_samples", F.test_samples},
               {"features", F.features},
               {"classes", F.classes},
               {"separation", F.separation},
               {"mnist_dir", F.mnist_dir},
               {"mnist_train_limit", F.mnist_train_limit},
               {"mnist_test_limit", F.mnist_test_limit},
               {"true_epsilon", F.true_epsilon},
               {"realized_distortion", F.realized_distortion},
               {"manual_broadcast_var", F.manual_broadcast_var},
               {"manual_aggregation_var", F.manual_aggregation_var}};
  return j;
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const ExperimentConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical_json(cfg).dump())));
  return buf;
}

std::uint64_t realization_seed(const ExperimentConfig& cfg, int r) {
  return mix_seed(cfg.seed, static_cast<std::uint64_t>(r));
}

}  // namespace rfl::runner
