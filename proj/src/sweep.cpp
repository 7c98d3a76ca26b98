#include "pedcascade/sweep.hpp"

#include "pedcascade/parallel.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace pedcascade {

std::vector<SweepCell> grid_sweep(const std::vector<SweepAxis>& axes, const std::vector<std::uint64_t>& seeds,
                                  const CellFn& fn, int jobs) {
  if (axes.empty()) throw std::invalid_argument("sweep needs at least one axis");
  for (const auto& a : axes) {
    if (a.values.empty()) throw std::invalid_argument("sweep axis '" + a.name + "' has no values");
  }
  if (seeds.empty()) throw std::invalid_argument("sweep needs at least one seed");

  std::size_t n_cells = 1;
  for (const auto& a : axes) n_cells *= a.values.size();
  std::vector<SweepCell> cells(n_cells);
  for (std::size_t c = 0; c < n_cells; ++c) {
    std::size_t rem = c;
    cells[c].coords.resize(axes.size());
    for (std::size_t k = axes.size(); k-- > 0;) {
      cells[c].coords[k] = axes[k].values[rem % axes[k].values.size()];
      rem /= axes[k].values.size();
    }
  }

  parallel_for(n_cells, jobs, [&](std::size_t c) {
    SweepCell& cell = cells[c];
    try {
      for (std::uint64_t seed : seeds) cell.metrics.push_back(fn(cell.coords, seed));
    } catch (const std::exception& e) {
      cell.failed = true;
      cell.error = e.what();
      cell.metrics.clear();
      return;
    }
    double sum = 0.0;
    for (double m : cell.metrics) sum += m;
    cell.mean = sum / static_cast<double>(cell.metrics.size());
    if (cell.metrics.size() > 1) {
      double ss = 0.0;
      for (double m : cell.metrics) ss += (m - cell.mean) * (m - cell.mean);
      cell.stddev = std::sqrt(ss / static_cast<double>(cell.metrics.size() - 1));
    }
  });
  return cells;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

std::string json_field(const nlohmann::json& v) {
  if (v.is_string()) return csv_field(v.get<std::string>());
  if (v.is_array()) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "-" : "") + json_field(v[i]);
    return s;
  }
  return csv_field(v.dump());
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string sweep_csv(const std::vector<SweepAxis>& axes, const std::vector<SweepCell>& cells) {
  std::ostringstream out;
  for (const auto& a : axes) out << csv_field(a.name) << ',';
  out << "mean,std,n,status\n";
  for (const auto& c : cells) {
    for (const auto& v : c.coords) out << json_field(v) << ',';
    if (c.failed) {
      out << ",,0," << csv_field("failed: " + c.error) << '\n';
    } else {
      out << num(c.mean) << ',' << num(c.stddev) << ',' << c.metrics.size() << ",ok\n";
    }
  }
  return out.str();
}

}  // namespace pedcascade
