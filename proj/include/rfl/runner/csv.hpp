#pragma once

// Result tables. Column sets are frozen per table kind; numbers are written
// with a fixed format so reruns are byte identical.

#include <iosfwd>
#include <string>
#include <vector>

namespace rfl::runner {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] int column(const std::string& name) const;  // -1 when absent
};

std::string fmt(double v);
std::string fmt(int v);
std::string fmt_bool(bool v);
std::string join_ints(const std::vector<int>& v);  // "0;3;5"

void write_csv(std::ostream& os, const Table& t);
void write_csv_file(const std::string& path, const Table& t);
Table read_csv(std::istream& is);
Table read_csv_file(const std::string& path);

/// Frozen layouts.
namespace columns {
extern const std::vector<std::string> selection;
extern const std::vector<std::string> trace;
extern const std::vector<std::string> trace_mean;
extern const std::vector<std::string> oracle;
extern const std::vector<std::string> fl;
extern const std::vector<std::string> summary_prefix;  // followed by the key columns
}  // namespace columns

/// Grouped mean and standard error per grid point (per round / iteration
/// where applicable), long format:
///   config_hash, scenario, <keys...>, metric, n, mean, stderr
/// Only rows with status "ok" enter the statistics. Throws when the rows
/// carry more than one config hash or the layout is unknown.
Table summarize_table(const Table& results);

/// Summarizes every result CSV in `dir` (or the single file `path`) into
/// `<name>_summary.csv` next to it; returns the written paths. All inputs
/// must share one config hash.
std::vector<std::string> summarize_path(const std::string& path);

}  // namespace rfl::runner
