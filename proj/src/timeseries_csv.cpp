#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "shm/error.hpp"
#include "shm/transient.hpp"

namespace shm::sim {

namespace {

std::string format(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

[[noreturn]] void malformed(const std::string& what) {
  throw Error(ErrorKind::MalformedFile, "time series csv: " + what);
}

double parse_double(const std::string& s, int line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    malformed("line " + std::to_string(line) + ": '" + s + "' is not a number");
  }
  if (used != s.size()) malformed("line " + std::to_string(line) + ": trailing characters in '" + s + "'");
  return v;
}

}  // namespace

void write_csv(const TimeSeries& series, std::ostream& out) {
  series.validate();
  out << "# fs=" << format("%.17g", series.fs) << '\n';
  out << "# case_id=" << series.meta.case_id << '\n';
  out << "# seed=" << series.meta.seed << '\n';
  for (const auto& s : series.meta.sensors) out << "# sensor=" << s << '\n';
  out << 't';
  for (const auto& n : series.names) out << ',' << n;
  out << '\n';
  const int n = series.n_samples();
  for (int k = 0; k < n; ++k) {
    out << format("%.12e", k / series.fs);
    for (const auto& ch : series.channels) out << ',' << format("%.17e", ch[k]);
    out << '\n';
  }
}

TimeSeries read_csv(std::istream& in) {
  TimeSeries ts;
  ts.fs = 0.0;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  std::vector<double> times;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto body = line.substr(line.find_first_not_of("# "));
      const auto eq = body.find('=');
      if (eq == std::string::npos) continue;
      const auto key = body.substr(0, eq);
      const auto val = body.substr(eq + 1);
      try {
        if (key == "fs") ts.fs = parse_double(val, line_no);
        else if (key == "case_id") ts.meta.case_id = std::stoi(val);
        else if (key == "seed") ts.meta.seed = std::stoull(val);
        else if (key == "sensor") ts.meta.sensors.push_back(val);
      } catch (const std::logic_error&) {
        malformed("line " + std::to_string(line_no) + ": bad value for '" + key + "'");
      }
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!have_header) {
      if (cells.empty() || cells[0] != "t") malformed("header must start with 't'");
      ts.names.assign(cells.begin() + 1, cells.end());
      ts.channels.resize(ts.names.size());
      have_header = true;
      continue;
    }
    if (cells.size() != ts.names.size() + 1)
      malformed("line " + std::to_string(line_no) + ": expected " + std::to_string(ts.names.size() + 1) +
                " fields, got " + std::to_string(cells.size()));
    times.push_back(parse_double(cells[0], line_no));
    for (std::size_t c = 0; c < ts.names.size(); ++c) ts.channels[c].push_back(parse_double(cells[c + 1], line_no));
  }
  if (!have_header) malformed("missing 't,...' header");
  if (times.empty()) malformed("no samples");
  if (ts.fs <= 0.0) {
    if (times.size() < 2) malformed("missing '# fs=' and too few samples to infer it");
    ts.fs = (times.size() - 1) / (times.back() - times.front());
  }
  try {
    ts.validate();
  } catch (const Error& e) {
    malformed(e.what());
  }
  return ts;
}

}  // namespace shm::sim
