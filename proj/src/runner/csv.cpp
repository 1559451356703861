#include <rfl/runner/csv.hpp>

#include <rfl/common.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace rfl::runner {

namespace fs = std::filesystem;

int Table::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  // Shortest representation that round-trips; "-0" is folded into "0".
  const auto res = std::to_chars(buf, buf + sizeof buf, v == 0.0 ? 0.0 : v);
  return std::string(buf, res.ptr);
}

std::string fmt(int v) { return std::to_string(v); }
std::string fmt_bool(bool v) { return v ? "1" : "0"; }

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + std::to_string(v[i]);
  return s;
}

namespace {

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool in_q = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_q) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        in_q = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      in_q = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void write_csv(std::ostream& os, const Table& t) {
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << quote(cells[i]);
    os << '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
}

void write_csv_file(const std::string& path, const Table& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_csv(out, t);
}

Table read_csv(std::istream& is) {
  Table t;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != t.header.size()) throw std::runtime_error("ragged CSV row");
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

Table read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  return read_csv(in);
}

namespace columns {
const std::vector<std::string> selection{
    "config_hash", "scenario", "point", "gamma_b_db", "gamma_d_db", "epsilon", "realization", "seed", "status",
    "num_selected", "selected", "chi_l1", "sparsity_iterations", "sparsity_converged", "feasibility_attempts",
    "objective", "mse_bs", "mse_device_max", "wall_time_s"};
const std::vector<std::string> trace{"config_hash", "scenario", "point", "gamma_b_db", "gamma_d_db",
                                     "epsilon", "realization", "seed", "iteration", "chi_l1"};
const std::vector<std::string> trace_mean{"config_hash", "scenario", "point", "gamma_b_db", "gamma_d_db",
                                          "epsilon", "iteration", "n", "mean_chi_l1", "stderr_chi_l1"};
const std::vector<std::string> oracle{"config_hash", "scenario", "point", "gamma_b_db", "gamma_d_db",
                                      "epsilon", "realization", "seed", "status", "m_final",
                                      "oracle_max", "within_one", "exceeds", "wall_time_s"};
const std::vector<std::string> fl{"config_hash", "scenario", "point", "design", "gamma_b_db", "gamma_d_db",
                                  "epsilon", "realization", "seed", "status", "round", "train_loss",
                                  "test_loss", "test_accuracy", "num_selected", "mse_bs", "mse_device_mean",
                                  "skipped", "wall_time_s"};
const std::vector<std::string> summary_prefix{"config_hash", "scenario"};
}  // namespace columns

namespace {

struct Layout {
  std::vector<std::string> keys;
  std::vector<std::string> metrics;
};

bool layout_for(const std::vector<std::string>& header, Layout& out) {
  const std::vector<std::string> grid{"point", "gamma_b_db", "gamma_d_db", "epsilon"};
  if (header == columns::selection) {
    out = {grid, {"num_selected", "chi_l1", "sparsity_iterations", "sparsity_converged", "feasibility_attempts",
                  "objective", "mse_bs", "mse_device_max"}};
  } else if (header == columns::trace) {
    auto k = grid;
    k.push_back("iteration");
    out = {k, {"chi_l1"}};
  } else if (header == columns::oracle) {
    out = {grid, {"m_final", "oracle_max", "within_one", "exceeds"}};
  } else if (header == columns::fl) {
    out = {{"point", "design", "gamma_b_db", "gamma_d_db", "epsilon", "round"},
           {"train_loss", "test_loss", "test_accuracy", "num_selected", "mse_bs", "mse_device_mean", "skipped"}};
  } else {
    return false;
  }
  return true;
}

double parse_num(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw std::runtime_error("non-numeric cell '" + s + "'");
  return v;
}

}  // namespace

Table summarize_table(const Table& results) {
  Layout lay;
  if (!layout_for(results.header, lay)) throw std::runtime_error("unrecognised result layout");
  const int hash_col = results.column("config_hash");
  const int scen_col = results.column("scenario");
  const int status_col = results.column("status");
  std::vector<int> key_cols;
  for (const auto& k : lay.keys) key_cols.push_back(results.column(k));
  std::vector<int> metric_cols;
  for (const auto& m : lay.metrics) metric_cols.push_back(results.column(m));

  std::string hash;
  std::string scenario;
  std::vector<std::vector<std::string>> group_keys;
  std::map<std::vector<std::string>, std::size_t> group_of;
  std::vector<std::vector<std::vector<double>>> values;  // group, metric, samples
  for (const auto& row : results.rows) {
    if (hash.empty()) {
      hash = row[static_cast<std::size_t>(hash_col)];
      scenario = row[static_cast<std::size_t>(scen_col)];
    } else if (row[static_cast<std::size_t>(hash_col)] != hash) {
      throw std::runtime_error("rows carry different config hashes (" + hash + ", " +
                               row[static_cast<std::size_t>(hash_col)] + ")");
    }
    std::vector<std::string> key;
    for (int c : key_cols) key.push_back(row[static_cast<std::size_t>(c)]);
    auto [it, inserted] = group_of.emplace(key, group_keys.size());
    if (inserted) {
      group_keys.push_back(key);
      values.emplace_back(metric_cols.size());
    }
    if (status_col >= 0 && row[static_cast<std::size_t>(status_col)] != "ok") continue;
    for (std::size_t m = 0; m < metric_cols.size(); ++m)
      values[it->second][m].push_back(parse_num(row[static_cast<std::size_t>(metric_cols[m])]));
  }

  Table out;
  out.header = columns::summary_prefix;
  out.header.insert(out.header.end(), lay.keys.begin(), lay.keys.end());
  for (const char* c : {"metric", "n", "mean", "stderr"}) out.header.emplace_back(c);
  for (std::size_t g = 0; g < group_keys.size(); ++g) {
    for (std::size_t m = 0; m < metric_cols.size(); ++m) {
      const auto& v = values[g][m];
      const auto n = static_cast<double>(v.size());
      double mean = 0.0;
      for (double x : v) mean += x;
      mean = v.empty() ? std::nan("") : mean / n;
      double se = v.empty() ? std::nan("") : 0.0;
      if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        se = std::sqrt(ss / (n - 1.0) / n);
      }
      std::vector<std::string> r{hash, scenario};
      r.insert(r.end(), group_keys[g].begin(), group_keys[g].end());
      r.push_back(lay.metrics[m]);
      r.push_back(std::to_string(v.size()));
      r.push_back(fmt(mean));
      r.push_back(fmt(se));
      out.rows.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<std::string> summarize_path(const std::string& path) {
  std::vector<fs::path> inputs;
  if (fs::is_directory(path)) {
    for (const auto& e : fs::directory_iterator(path)) {
      if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
      const std::string stem = e.path().stem().string();
      if (stem.size() >= 8 && stem.compare(stem.size() - 8, 8, "_summary") == 0) continue;
      inputs.push_back(e.path());
    }
    std::sort(inputs.begin(), inputs.end());
  } else if (fs::is_regular_file(path)) {
    inputs.emplace_back(path);
  } else {
    throw std::runtime_error("no such file or directory: " + path);
  }

  std::vector<std::pair<fs::path, Table>> todo;
  std::string hash;
  for (const auto& p : inputs) {
    Table t = read_csv_file(p.string());
    Layout lay;
    if (!layout_for(t.header, lay)) continue;  // e.g. mean traces
    const int hc = t.column("config_hash");
    for (const auto& row : t.rows) {
      const std::string& h = row[static_cast<std::size_t>(hc)];
      if (hash.empty()) hash = h;
      if (h != hash) throw std::runtime_error("refusing to summarize mixed config hashes (" + hash + ", " + h + ")");
    }
    todo.emplace_back(p, std::move(t));
  }
  if (todo.empty()) throw std::runtime_error("no result tables found in " + path);

  std::vector<std::string> written;
  for (const auto& [p, t] : todo) {
    fs::path outp = p;
    outp.replace_filename(p.stem().string() + "_summary.csv");
    write_csv_file(outp.string(), summarize_table(t));
    written.push_back(outp.string());
  }
  return written;
}

}  // namespace rfl::runner
