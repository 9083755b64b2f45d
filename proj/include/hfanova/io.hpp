#pragma once

// JSON configuration parsing and CSV/JSON persistence.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hfanova/errors.hpp"
#include "hfanova/linalg.hpp"
#include "hfanova/model.hpp"
#include "hfanova/spectral_core.hpp"
#include "hfanova/testing.hpp"
#include "hfanova/weights.hpp"

namespace hfanova::io {

using json = nlohmann::json;

/// Shortest round-trip decimal form ("%.17g").
[[nodiscard]] inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

[[nodiscard]] inline json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << text;
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

namespace detail {

inline const json& require(const json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
    return j.at(key);
}

inline double number(const json& j, const std::string& what) {
    if (!j.is_number()) throw ConfigError(what + " must be a number");
    return j.get<double>();
}

inline std::vector<double> numbers(const json& j, const std::string& what) {
    if (j.is_number()) return {j.get<double>()};
    if (!j.is_array()) throw ConfigError(what + " must be a number or an array of numbers");
    std::vector<double> out;
    for (const auto& v : j) out.push_back(number(v, what));
    return out;
}

inline Matrix matrix(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty()) throw ConfigError(what + " must be a non-empty array of rows");
    const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
    if (cols == 0) throw ConfigError(what + " rows must be non-empty arrays");
    Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < j.size(); ++r) {
        if (!j[r].is_array() || j[r].size() != cols) throw ConfigError(what + ": ragged rows");
        for (std::size_t c = 0; c < cols; ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = number(j[r][c], what);
        }
    }
    return m;
}

inline json to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

inline FunctionDescriptor function_descriptor(const json& j) {
    const std::string kind = j.value("kind", "power");
    if (kind == "polynomial") return FunctionDescriptor::polynomial(numbers(require(j, "coefficients", "function"), "coefficients"));
    if (kind == "power") return FunctionDescriptor::power(j.value("coef", 1.0), j.value("exponent", 1.0));
    if (kind == "affine_power") {
        return FunctionDescriptor::affine_power(j.value("offset", 0.0), j.value("coef", 1.0), j.value("exponent", 1.0));
    }
    throw ConfigError("unknown function kind '" + kind + "'");
}

}  // namespace detail

/// Model plus the weight plan read from the same document.
struct ModelConfig {
    ModelSpec model;
    WeightPlan plan;
    json source;
};

/// Reads {n, p, K_max, X, spectrum, rho, beta | beta_rule, sigma, weights}.
/// `kmax_override` (0 = none) replaces K_max.
[[nodiscard]] inline ModelConfig parse_model(const json& j, std::size_t kmax_override = 0) {
    const std::string where = "model";
    const Matrix x = detail::matrix(detail::require(j, "X", where), "X");
    if (j.contains("n") && j.at("n").get<long long>() != x.rows()) throw ConfigError("model: n does not match X");
    if (j.contains("p") && j.at("p").get<long long>() != x.cols()) throw ConfigError("model: p does not match X");
    std::size_t k_max = kmax_override;
    if (k_max == 0) {
        const json& kj = detail::require(j, "K_max", where);
        if (!kj.is_number_integer() || kj.get<long long>() < 1) throw ConfigError("model: K_max must be a positive integer");
        k_max = kj.get<std::size_t>();
    }
    const auto n = static_cast<std::size_t>(x.rows());
    const auto p = static_cast<std::size_t>(x.cols());

    Matrix rho;
    if (j.contains("rho")) rho = detail::matrix(j.at("rho"), "rho");

    const json& sp = detail::require(j, "spectrum", where);
    const std::string kind = sp.value("kind", "");
    SpectrumFamily family;
    if (kind == "power-law") {
        std::vector<double> scales = detail::numbers(detail::require(sp, "scales", "spectrum"), "scales");
        std::vector<double> exps = detail::numbers(detail::require(sp, "exponents", "spectrum"), "exponents");
        if (scales.size() == 1) scales.assign(n, scales.front());
        if (exps.size() == 1) exps.assign(n, exps.front());
        family = SpectrumFamily::power_law(scales, exps, k_max, rho);
    } else if (kind == "pseudodiff") {
        std::vector<FunctionDescriptor> fs;
        for (const auto& f : detail::require(sp, "functions", "spectrum")) fs.push_back(detail::function_descriptor(f));
        if (fs.size() == 1) fs.assign(n, fs.front());
        OperatorLaw law;
        if (sp.contains("operator")) {
            const json& o = sp.at("operator");
            law = {o.value("scale", 1.0), o.value("exponent", 1.0), o.value("shift", 0.0)};
        }
        family = SpectrumFamily::pseudodiff(fs, law, k_max, rho);
    } else if (kind == "explicit") {
        Matrix values = detail::matrix(detail::require(sp, "values", "spectrum"), "spectrum.values");
        if (static_cast<std::size_t>(values.rows()) < k_max) {
            throw ConfigError("spectrum: explicit values have " + std::to_string(values.rows()) + " rows, K_max=" +
                              std::to_string(k_max));
        }
        family = SpectrumFamily::explicit_values(values.topRows(static_cast<Eigen::Index>(k_max)), rho);
    } else {
        throw ConfigError("spectrum.kind must be one of power-law, pseudodiff, explicit");
    }
    if (family.n() != n) throw ConfigError("spectrum has " + std::to_string(family.n()) + " components, n=" + std::to_string(n));
    SpectralMatrixOperator lambda = build_lambda(family, k_max);

    const auto kk = static_cast<Eigen::Index>(k_max);
    Matrix beta = Matrix::Zero(kk, static_cast<Eigen::Index>(p));
    if (j.contains("beta")) {
        Matrix b = detail::matrix(j.at("beta"), "beta");
        if (b.rows() < kk || static_cast<std::size_t>(b.cols()) != p) {
            throw ConfigError("beta must have at least K_max rows and p columns");
        }
        beta = b.topRows(kk);
    } else if (j.contains("beta_rule")) {
        const json& r = j.at("beta_rule");
        std::vector<double> amp = detail::numbers(detail::require(r, "amplitude", "beta_rule"), "amplitude");
        if (amp.size() == 1) amp.assign(p, amp.front());
        if (amp.size() != p) throw ConfigError("beta_rule.amplitude needs 1 or p entries");
        const double decay = r.value("decay", 2.0);
        for (Eigen::Index k = 0; k < kk; ++k) {
            for (std::size_t i = 0; i < p; ++i) {
                beta(k, static_cast<Eigen::Index>(i)) = amp[i] * std::pow(static_cast<double>(k + 1), -decay);
            }
        }
    }
    const double sigma = j.value("sigma", 1.0);

    WeightPlan plan;
    if (j.contains("weights")) {
        const json& w = j.at("weights");
        plan.mode = weight_mode_from_string(w.value("mode", "ssr"));
        if (w.contains("rho_tilde")) plan.rho_tilde = detail::numbers(w.at("rho_tilde"), "weights.rho_tilde");
        if (w.contains("varrho")) plan.varrho = detail::numbers(w.at("varrho"), "weights.varrho");
        plan.M = w.value("M", 1.0);
        plan.validate();
    }
    ModelConfig cfg{ModelSpec(x, std::move(lambda), CoefficientBlock(std::move(beta), BasisMeta(k_max)), sigma),
                    plan, j};
    return cfg;
}

/// Reads {K: {matrix | matrices | rule {base, exponent}}, C, alpha}.
/// A rule builds K_l = base * l^exponent.
[[nodiscard]] inline TestSpec parse_test(const json& j, const BasisMeta& basis, std::size_t p) {
    const json& kj = detail::require(j, "K", "test");
    std::vector<Matrix> mats;
    if (kj.contains("matrix")) {
        const Matrix m = detail::matrix(kj.at("matrix"), "K.matrix");
        mats.assign(basis.k_max, m);
    } else if (kj.contains("matrices")) {
        const json& arr = kj.at("matrices");
        if (!arr.is_array() || arr.size() < basis.k_max) throw ConfigError("K.matrices needs K_max entries");
        for (std::size_t l = 0; l < basis.k_max; ++l) mats.push_back(detail::matrix(arr[l], "K.matrices"));
    } else if (kj.contains("rule")) {
        const json& r = kj.at("rule");
        const Matrix base = detail::matrix(detail::require(r, "base", "K.rule"), "K.rule.base");
        const double e = r.value("exponent", 0.0);
        for (std::size_t l = 1; l <= basis.k_max; ++l) mats.push_back(base * std::pow(static_cast<double>(l), e));
    } else {
        throw ConfigError("test.K needs one of matrix, matrices, rule");
    }
    TestSpec spec;
    spec.K = SpectralMatrixOperator(std::move(mats), basis);
    const auto m = spec.K.rows();
    if (j.contains("C")) {
        const Matrix c = detail::matrix(j.at("C"), "C");
        if (static_cast<std::size_t>(c.rows()) < basis.k_max) throw ConfigError("C needs K_max rows");
        spec.C = CoefficientBlock(c.topRows(static_cast<Eigen::Index>(basis.k_max)), basis);
    } else {
        spec.C = CoefficientBlock::zeros(basis, m);
    }
    spec.alpha = j.value("alpha", 0.05);
    spec.validate(p);
    return spec;
}

/// CSV with header `k,<prefix>1..<prefix>d`, one row per k, values at %.17g.
[[nodiscard]] inline std::string block_csv(const CoefficientBlock& b, const std::string& prefix) {
    std::string s = "k";
    for (std::size_t i = 1; i <= b.d(); ++i) s += "," + prefix + std::to_string(i);
    s += "\n";
    for (std::size_t k = 0; k < b.k_max(); ++k) {
        s += std::to_string(k + 1);
        for (std::size_t i = 0; i < b.d(); ++i) {
            s += "," + fmt(b.data()(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)));
        }
        s += "\n";
    }
    return s;
}

[[nodiscard]] inline CoefficientBlock read_block_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("'" + path.string() + "' is empty");
    std::vector<std::vector<double>> rows;
    std::size_t expect_k = 1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        bool first = true;
        while (std::getline(ss, cell, ',')) {
            double v = 0.0;
            try {
                std::size_t used = 0;
                v = std::stod(cell, &used);
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw ConfigError("'" + path.string() + "': bad number '" + cell + "'");
            }
            if (first) {
                if (v != static_cast<double>(expect_k)) throw ConfigError("'" + path.string() + "': rows must be k = 1, 2, ...");
                first = false;
            } else {
                row.push_back(v);
            }
        }
        rows.push_back(std::move(row));
        ++expect_k;
    }
    if (rows.empty()) throw ConfigError("'" + path.string() + "' has no data rows");
    return project(rows, rows.front().size());
}

/// 64-bit FNV-1a over the canonical text form of the model.
[[nodiscard]] inline std::uint64_t model_hash(const ModelSpec& m) {
    std::string text;
    auto add = [&text](const Matrix& a) {
        text += std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + ":";
        for (Eigen::Index r = 0; r < a.rows(); ++r) {
            for (Eigen::Index c = 0; c < a.cols(); ++c) text += fmt(a(r, c)) + ",";
        }
        text += ";";
    };
    add(m.X);
    for (const Matrix& l : m.lambda.mats()) add(l);
    add(m.beta.data());
    text += fmt(m.sigma);
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

[[nodiscard]] inline std::string hex(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace hfanova::io
