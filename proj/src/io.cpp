#include "confor/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace confor {

namespace {

Vector vector_from_json(const json& j) { return j.get<Vector>(); }

Matrix matrix_from_json(const json& j) {
    if (!j.is_array() || j.empty()) throw std::invalid_argument("matrix: expected array of rows");
    const std::size_t rows = j.size(), cols = j[0].size();
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (j[i].size() != cols) throw std::invalid_argument("matrix: ragged rows");
        for (std::size_t k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
    }
    return m;
}

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(std::move(r));
    }
    return rows;
}

double require_number(const json& j, const char* field) {
    if (!j.contains(field) || !j[field].is_number())
        throw std::invalid_argument(std::string("missing or non-numeric field \"") + field + "\"");
    return j[field].get<double>();
}

}  // namespace

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

MarginalDistribution margin_from_json(const json& j, const std::filesystem::path& base_dir) {
    if (!j.contains("kind")) throw std::invalid_argument("distribution: missing \"kind\"");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "normal")
        return MarginalDistribution::normal(require_number(j, "m"), require_number(j, "v"));
    if (kind == "lognormal")
        return MarginalDistribution::lognormal(require_number(j, "m"), require_number(j, "v"));
    if (kind == "exponential")
        return MarginalDistribution::exponential(require_number(j, "rate"));
    if (kind == "log_t")
        return MarginalDistribution::log_t(require_number(j, "k"), require_number(j, "m"),
                                           require_number(j, "v"));
    if (kind == "zero_inflated")
        return MarginalDistribution::zero_inflated(require_number(j, "pi0"),
                                                   margin_from_json(j.at("positive"), base_dir));
    if (kind == "empirical") {
        if (j.contains("path")) {
            auto csv = read_sample_csv(base_dir / j.at("path").get<std::string>());
            if (csv.values.cols() != 1)
                throw std::invalid_argument("empirical margin: CSV must have one value column");
            Vector col(csv.values.rows());
            for (std::size_t r = 0; r < csv.values.rows(); ++r) col[r] = csv.values(r, 0);
            return MarginalDistribution::empirical(std::move(col), csv.weights);
        }
        return MarginalDistribution::empirical(vector_from_json(j.at("values")),
                                               j.contains("weights")
                                                   ? vector_from_json(j.at("weights"))
                                                   : Vector{});
    }
    throw std::invalid_argument("distribution: unknown kind \"" + kind + "\"");
}

json margin_to_json(const MarginalDistribution& d) {
    const auto& p = d.params();
    if (const auto* n = std::get_if<NormalParams>(&p))
        return {{"kind", "normal"}, {"m", n->m}, {"v", n->v}};
    if (const auto* ln = std::get_if<LognormalParams>(&p))
        return {{"kind", "lognormal"}, {"m", ln->m}, {"v", ln->v}};
    if (const auto* e = std::get_if<ExponentialParams>(&p))
        return {{"kind", "exponential"}, {"rate", e->rate}};
    if (const auto* lt = std::get_if<LogTParams>(&p))
        return {{"kind", "log_t"}, {"k", lt->dof}, {"m", lt->m}, {"v", lt->v}};
    if (const auto* zi = std::get_if<ZeroInflatedParams>(&p))
        return {{"kind", "zero_inflated"}, {"pi0", zi->pi0},
                {"positive", margin_to_json(*zi->positive)}};
    const auto& emp = std::get<EmpiricalParams>(p);
    return {{"kind", "empirical"}, {"values", emp.values}, {"weights", emp.weights}};
}

JointForecast joint_from_json(const json& j, const std::filesystem::path& base_dir) {
    if (!j.contains("kind")) throw std::invalid_argument("joint: missing \"kind\"");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "mvlognormal")
        return JointForecast::mv_lognormal(vector_from_json(j.at("m")),
                                           matrix_from_json(j.at("V")));
    if (kind == "mvnormal")
        return JointForecast::mv_normal(vector_from_json(j.at("m")),
                                        matrix_from_json(j.at("V")));
    if (kind == "empirical") {
        auto csv = read_sample_csv(base_dir / j.at("path").get<std::string>());
        return JointForecast::empirical(std::move(csv.values), std::move(csv.weights));
    }
    throw std::invalid_argument("joint: unknown kind \"" + kind + "\"");
}

json joint_to_json(const JointForecast& jf) {
    const auto& p = jf.params();
    if (const auto* mvln = std::get_if<MvLognormalParams>(&p))
        return {{"kind", "mvlognormal"}, {"m", mvln->m}, {"V", matrix_to_json(mvln->V)}};
    if (const auto* mvn = std::get_if<MvNormalParams>(&p))
        return {{"kind", "mvnormal"}, {"m", mvn->m}, {"V", matrix_to_json(mvn->V)}};
    const auto& emp = std::get<EmpiricalMatrixParams>(p);
    return {{"kind", "empirical"}, {"rows", emp.samples.rows()},
            {"weights", emp.weights}};
}

LossFamily loss_from_json(const json& j) {
    if (!j.contains("loss")) throw std::invalid_argument("loss: missing \"loss\"");
    const std::string name = j.at("loss").get<std::string>();
    LossFamily l;
    if (name == "SE") l.kind = LossKind::SE;
    else if (name == "AD") l.kind = LossKind::AD;
    else if (name == "APE") l.kind = LossKind::APE;
    else if (name == "ZAPE") l.kind = LossKind::ZAPE;
    else if (name == "WAPE") l.kind = LossKind::WAPE;
    else throw std::invalid_argument("loss: unknown family \"" + name + "\"");
    if (j.contains("weights")) l.weights = vector_from_json(j.at("weights"));
    return l;
}

json loss_to_json(const LossFamily& l) {
    json j{{"loss", loss_kind_name(l.kind)}};
    if (!l.weights.empty()) j["weights"] = l.weights;
    return j;
}

SolverOptions solver_options_from_json(const json& j) {
    SolverOptions o;
    if (j.contains("tol")) o.tol = j.at("tol").get<double>();
    if (j.contains("max_iter")) o.max_iter = j.at("max_iter").get<int>();
    if (j.contains("lambda0") && !j.at("lambda0").is_null())
        o.lambda0 = j.at("lambda0").get<double>();
    if (j.contains("lambda_tol")) o.lambda_tol = j.at("lambda_tol").get<double>();
    if (j.contains("force_newton")) o.force_newton = j.at("force_newton").get<bool>();
    return o;
}

json solver_options_to_json(const SolverOptions& o) {
    json j{{"tol", o.tol}, {"max_iter", o.max_iter}, {"lambda_tol", o.lambda_tol}};
    if (o.lambda0) j["lambda0"] = *o.lambda0;
    if (o.force_newton) j["force_newton"] = true;
    return j;
}

json solve_result_to_json(const SolveResult& r) {
    json iters = json::array();
    for (const auto& it : r.iterations) {
        if (it.lambda.size() == 1)
            iters.push_back({{"lambda", it.lambda[0]}, {"total", it.value}});
        else
            iters.push_back({{"lambda", it.lambda}, {"residual", it.value}});
    }
    json j{{"status", solve_status_name(r.status)},
           {"f_star", r.f_star},
           {"residual", r.residual},
           {"iterations", std::move(iters)}};
    if (r.lambda_star.size() == 1) {
        j["lambda_star"] = r.lambda_star[0];
        j["qdot"] = r.qdot;
    } else {
        j["lambda_star"] = r.lambda_star;
    }
    if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
    return j;
}

json summary_to_json(const LossDistributionSummary& s) {
    return {{"per_dimension", s.per_dimension}, {"mean", s.mean},     {"median", s.median},
            {"q05", s.q05},                     {"q95", s.q95},       {"min", s.min},
            {"max", s.max},                     {"count", s.count},   {"std_error", s.std_error}};
}

CsvSamples read_sample_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open CSV file: " + path.string());
    CsvSamples out;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty CSV file: " + path.string());
    {
        std::stringstream header(line);
        std::string cell;
        while (std::getline(header, cell, ',')) out.names.push_back(cell);
    }
    bool has_weight = !out.names.empty() && out.names.back() == "weight";
    const std::size_t cols = out.names.size() - (has_weight ? 1 : 0);
    if (cols == 0) throw std::runtime_error("CSV has no value columns: " + path.string());

    std::vector<double> values;
    std::size_t rows = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t col = 0;
        while (std::getline(ss, cell, ',')) {
            double x = 0.0;
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), x);
            if (res.ec != std::errc{})
                throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                         ": bad number \"" + cell + "\"");
            if (col < cols) values.push_back(x);
            else out.weights.push_back(x);
            ++col;
        }
        if (col != out.names.size())
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": expected " + std::to_string(out.names.size()) +
                                     " columns, got " + std::to_string(col));
        ++rows;
    }
    if (has_weight) out.names.pop_back();
    out.values = Matrix(rows, cols);
    std::copy(values.begin(), values.end(), out.values.data().begin());
    return out;
}

void write_sample_csv(const std::filesystem::path& path,
                      const std::vector<std::string>& names, const Matrix& values) {
    std::ofstream outf(path);
    if (!outf) throw std::runtime_error("cannot write CSV file: " + path.string());
    for (std::size_t j = 0; j < names.size(); ++j)
        outf << (j ? "," : "") << names[j];
    outf << "\n";
    for (std::size_t i = 0; i < values.rows(); ++i) {
        for (std::size_t j = 0; j < values.cols(); ++j)
            outf << (j ? "," : "") << format_double(values(i, j));
        outf << "\n";
    }
}

void write_pairs_csv(const std::filesystem::path& path, const std::string& header,
                     const std::vector<std::pair<double, double>>& rows) {
    std::ofstream outf(path);
    if (!outf) throw std::runtime_error("cannot write CSV file: " + path.string());
    outf << header << "\n";
    for (const auto& [a, b] : rows)
        outf << format_double(a) << "," << format_double(b) << "\n";
}

}  // namespace confor
