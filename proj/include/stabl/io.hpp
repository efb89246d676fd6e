#pragma once

#include <charconv>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "stabl/bagging.hpp"
#include "stabl/common.hpp"
#include "stabl/learners.hpp"
#include "stabl/stability.hpp"
#include "stabl/theory.hpp"

namespace stabl {

using json = nlohmann::ordered_json;

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

// Strict decimal-dot parse; locale-style comma decimals and any trailing junk
// are rejected.
inline double parse_number(const std::string& field, int line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw DomainError("parse error at line " + std::to_string(line_no) + ": non-numeric cell '" +
                      field + "'");
  return v;
}

}  // namespace detail

// CSV with header x_1,...,x_d,y; UTF-8; decimal dot. Preserves row order.
inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open dataset file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DomainError("parse error at line 1: missing header");
  auto header = detail::split_csv_line(line);
  if (header.size() < 2 || header.back() != "y")
    throw DomainError("parse error at line 1: header must be x_1,...,x_d,y");
  const int d = static_cast<int>(header.size()) - 1;
  for (int j = 0; j < d; ++j)
    if (header[j] != "x_" + std::to_string(j + 1))
      throw DomainError("parse error at line 1: expected column x_" + std::to_string(j + 1) +
                        ", got '" + header[j] + "'");
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (static_cast<int>(fields.size()) != d + 1)
      throw DomainError("parse error at line " + std::to_string(line_no) + ": expected " +
                        std::to_string(d + 1) + " fields, got " + std::to_string(fields.size()));
    std::vector<double> row(d + 1);
    for (int j = 0; j <= d; ++j) row[j] = detail::parse_number(fields[j], line_no);
    rows.push_back(std::move(row));
  }
  Dataset data;
  data.x.resize(static_cast<int>(rows.size()), d);
  data.y.resize(static_cast<int>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int j = 0; j < d; ++j) data.x(static_cast<int>(r), j) = rows[r][j];
    data.y(static_cast<int>(r)) = rows[r][d];
  }
  return data;
}

inline void save_dataset(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write dataset file '" + path + "'");
  for (int j = 0; j < data.d(); ++j) out << "x_" << (j + 1) << ",";
  out << "y\n";
  for (int r = 0; r < data.n(); ++r) {
    for (int j = 0; j < data.d(); ++j) out << format_double(data.x(r, j)) << ",";
    out << format_double(data.y(r)) << "\n";
  }
}

// Histogram CSV: one row per training index with its LOO perturbation.
inline void write_perturbations_csv(const StabilityProfile& profile, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write '" + path + "'");
  out << "i,perturbation\n";
  for (int i = 0; i < profile.n; ++i)
    out << (i + 1) << "," << format_double(profile.perturbations(i)) << "\n";
}

// Curve CSV: columns epsilon,delta (the strict step function by default).
inline void write_curve_csv(const StabilityProfile& profile, const std::string& path,
                            bool strict = true) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write '" + path + "'");
  out << "epsilon,delta\n";
  for (const CurveBreakpoint& bp : epsilon_curve(profile))
    out << format_double(bp.epsilon) << ","
        << format_double(strict ? bp.delta_at : bp.delta_below) << "\n";
}

inline void write_phase_csv(const TheoryCurve& guarantee, const TheoryCurve& tightness,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write '" + path + "'");
  out << "delta,eps_guarantee,eps_tightness\n";
  for (std::size_t i = 0; i < guarantee.delta.size(); ++i)
    out << format_double(guarantee.delta[i]) << "," << format_double(guarantee.epsilon[i]) << ","
        << format_double(tightness.epsilon[i]) << "\n";
}

// Audit report. Contains everything needed to re-run the audit bit-for-bit.
inline json profile_report(const BaggedPredictor& pred, const StabilityProfile& profile,
                           bool strict_default) {
  json rep;
  rep["n"] = profile.n;
  rep["scheme"] = profile.scheme_desc;
  rep["mode"] = profile.mode_desc;
  rep["strict_flag"] = strict_default;
  rep["clip"] = pred.clip ? json(pred.clip->spec_string()) : json(nullptr);
  rep["learner"] = pred.learner.spec;
  rep["perturbations"] = std::vector<double>(profile.perturbations.data(),
                                             profile.perturbations.data() + profile.n);
  ProfileSummary s1 = summaries(profile, 1.0);
  rep["worst"] = s1.worst_case;
  rep["mean"] = s1.mean;
  json lk;
  for (double k : {1.0, 2.0, 4.0}) lk[format_double(k)] = summaries(profile, k).lk_norm;
  lk["inf"] = s1.worst_case;
  rep["lk"] = lk;
  if (profile.hoeffding_halfwidth > 0.0) {
    rep["hoeffding_halfwidth"] = profile.hoeffding_halfwidth;
    rep["hoeffding_dprime"] = profile.hoeffding_dprime;
  }
  // Exact-mode conventions that affect reproducibility.
  if (const auto* ex = std::get_if<ExactMode>(&pred.mode)) {
    rep["xi_quadrature"] = pred.learner.deterministic ? 1 : ex->xi_quadrature;
    if (pred.scheme.kind() == SchemeKind::Poissonized) rep["poisson_tail"] = 1e-12;
    if (pred.clip)
      rep["clip_convention"] = "exact mode clips the xi-averaged per-bag prediction";
  } else {
    if (pred.clip) rep["clip_convention"] = "monte carlo mode clips the realized prediction";
  }
  return rep;
}

inline void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

}  // namespace stabl
