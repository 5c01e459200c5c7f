#ifndef CONFOR_IO_HPP
#define CONFOR_IO_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "confor/analysis.hpp"
#include "confor/conditioning.hpp"
#include "confor/distributions.hpp"
#include "confor/losses.hpp"
#include "confor/solver.hpp"

namespace confor {

using json = nlohmann::json;

// Distribution JSON, e.g. {"kind":"lognormal","m":...,"v":...} or
// {"kind":"empirical","path":"samples.csv"}. Relative paths resolve against
// base_dir.
MarginalDistribution margin_from_json(const json& j,
                                      const std::filesystem::path& base_dir = {});
json margin_to_json(const MarginalDistribution& d);

// Joint JSON: {"kind":"mvlognormal","m":[...],"V":[[...]]}, mvnormal alike,
// or {"kind":"empirical","path":"samples.csv"}.
JointForecast joint_from_json(const json& j, const std::filesystem::path& base_dir = {});
json joint_to_json(const JointForecast& jf);

// Loss JSON: {"loss":"AD","weights":[...]}; weights default to all ones.
LossFamily loss_from_json(const json& j);
json loss_to_json(const LossFamily& l);

SolverOptions solver_options_from_json(const json& j);
json solver_options_to_json(const SolverOptions& o);

json solve_result_to_json(const SolveResult& r);
json summary_to_json(const LossDistributionSummary& s);

// CSV with a header row of series names, one sample per row, one column per
// dimension, optional trailing "weight" column.
struct CsvSamples {
    std::vector<std::string> names;
    Matrix values;
    Vector weights;  // empty when no weight column
};
CsvSamples read_sample_csv(const std::filesystem::path& path);
void write_sample_csv(const std::filesystem::path& path,
                      const std::vector<std::string>& names, const Matrix& values);

void write_pairs_csv(const std::filesystem::path& path, const std::string& header,
                     const std::vector<std::pair<double, double>>& rows);

// Shortest round-trip decimal text for a double (stable across runs).
std::string format_double(double x);

}  // namespace confor

#endif
