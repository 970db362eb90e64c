#include "ntkmmd/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <string_view>

#include "ntkmmd/error.hpp"

namespace ntkmmd {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

}  // namespace

SampleMatrix parse_csv_samples(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t columns = 0;
  bool have_header = false;
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_cells(line);
    if (!have_header) {
      have_header = true;
      columns = cells.size();
      continue;
    }
    if (cells.size() != columns)
      throw DataError(source + ": row " + std::to_string(line_no) + " has " +
                      std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(columns));
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      const auto cell = cells[c];
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(v))
        throw DataError(source + ": malformed cell at row " + std::to_string(line_no) +
                        ", column " + std::to_string(c + 1) + " ('" + std::string(cell) + "')");
      values.push_back(v);
    }
    ++rows;
  }
  if (!have_header) throw DataError(source + ": file is empty");
  if (rows == 0) throw DataError(source + ": no data rows after the header");
  SampleMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(columns));
  std::copy(values.begin(), values.end(), m.data());
  return m;
}

SampleMatrix read_csv_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse_csv_samples(in, path);
}

std::string format_real(double v) {
  std::array<char, 32> buf{};
  const int n = std::snprintf(buf.data(), buf.size(), "%.17g", v);
  return std::string(buf.data(), static_cast<std::size_t>(n));
}

void write_csv_samples(std::ostream& out, const SampleRef& samples,
                       const std::vector<std::string>& header) {
  if (!header.empty() && static_cast<Eigen::Index>(header.size()) != samples.cols())
    throw InputError("CSV header size does not match the column count");
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    if (j) out << ',';
    out << (header.empty() ? "x" + std::to_string(j + 1) : header[static_cast<std::size_t>(j)]);
  }
  out << '\n';
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    for (Eigen::Index j = 0; j < samples.cols(); ++j) {
      if (j) out << ',';
      out << format_real(samples(i, j));
    }
    out << '\n';
  }
}

void write_csv_samples(const std::string& path, const SampleRef& samples,
                       const std::vector<std::string>& header) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_csv_samples(out, samples, header);
}

TwoSample load_two_sample(const std::string& path_x, const std::string& path_y) {
  TwoSample s{read_csv_samples(path_x), read_csv_samples(path_y)};
  if (s.x.cols() != s.y.cols())
    throw DataError("'" + path_x + "' has " + std::to_string(s.x.cols()) + " columns but '" +
                    path_y + "' has " + std::to_string(s.y.cols()));
  return s;
}

std::string file_sha256(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    throw DataError("cannot initialize SHA-256");
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

nlohmann::ordered_json to_json(const BootstrapResult& r, bool include_null_samples) {
  nlohmann::ordered_json j;
  j["mode"] = std::string(to_string(r.mode));
  j["alpha_level"] = r.alpha_level;
  j["threshold"] = r.threshold;
  j["n_boot"] = r.null_samples.size();
  if (r.training_samples) j["training_samples"] = r.training_samples;
  if (include_null_samples) j["null_samples"] = r.null_samples;
  return j;
}

nlohmann::ordered_json to_json(const TestOutcome& o, bool include_null_samples) {
  nlohmann::ordered_json j;
  j["method"] = std::string(to_string(o.method));
  j["calibration"] = std::string(to_string(o.calibration));
  j["statistic"] = o.statistic;
  j["threshold"] = o.threshold;
  j["reject"] = o.reject;
  if (o.bootstrap) {
    auto b = to_json(*o.bootstrap, include_null_samples);
    if (!include_null_samples) b.erase("n_boot");
    j["bootstrap"] = std::move(b);
  }
  if (!o.trace.empty()) {
    auto& t = j["trace"] = nlohmann::ordered_json::array();
    for (const auto& cp : o.trace)
      t.push_back({{"samples_seen", cp.samples_seen},
                   {"statistic", cp.statistic},
                   {"threshold", cp.threshold},
                   {"reject", cp.reject}});
  }
  return j;
}

nlohmann::ordered_json to_json(const PowerEstimate& p) {
  return {{"n_run", p.n_run},
          {"rejections", p.rejections},
          {"power", p.power},
          {"wilson_ci_95", {p.wilson_ci_95.first, p.wilson_ci_95.second}}};
}

void write_trace_csv(std::ostream& out, const ChangePointTrace& trace) {
  out << "time,value,threshold,alarm\n";
  for (std::size_t i = 0; i < trace.times.size(); ++i) {
    out << trace.times[i] << ',' << format_real(trace.values[i]) << ',';
    if (trace.threshold) out << format_real(*trace.threshold);
    out << ',';
    if (trace.threshold) out << (trace.values[i] > *trace.threshold ? 1 : 0);
    out << '\n';
  }
}

}  // namespace ntkmmd
