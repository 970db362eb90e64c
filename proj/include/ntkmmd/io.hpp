#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "ntkmmd/bench.hpp"
#include "ntkmmd/calibration.hpp"
#include "ntkmmd/changepoint.hpp"
#include "ntkmmd/mmd.hpp"

namespace ntkmmd {

/// Reads a CSV file with one header row and one sample per row. Cells are
/// decimal reals; surrounding blanks are ignored. Errors name the 1-based
/// file line (the header is line 1) and 1-based column.
SampleMatrix read_csv_samples(const std::string& path);
SampleMatrix parse_csv_samples(std::istream& in, const std::string& source = "<stream>");

/// Writes `header` (or x1..xd when empty) and one row per sample, every
/// value with 17 significant digits so that reading it back is exact.
void write_csv_samples(std::ostream& out, const SampleRef& samples,
                       const std::vector<std::string>& header = {});
void write_csv_samples(const std::string& path, const SampleRef& samples,
                       const std::vector<std::string>& header = {});

/// Loads two CSV files as X and Y; throws DataError on dimension mismatch.
TwoSample load_two_sample(const std::string& path_x, const std::string& path_y);

/// Shortest-round-trip decimal text of a double (17 significant digits).
std::string format_real(double v);

/// Lowercase hex SHA-256 digest of a file's bytes.
std::string file_sha256(const std::string& path);

nlohmann::ordered_json to_json(const BootstrapResult& r, bool include_null_samples);
nlohmann::ordered_json to_json(const TestOutcome& o, bool include_null_samples);
nlohmann::ordered_json to_json(const PowerEstimate& p);

/// time,value,threshold,alarm rows.
void write_trace_csv(std::ostream& out, const ChangePointTrace& trace);

}  // namespace ntkmmd
