/* Copyright 2026 The bdrrn Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "bdrrn/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace bdrrn {

double mse(const Plane8& a, const Plane8& b) {
  if (a.width != b.width || a.height != b.height) {
    throw InputError("dimension mismatch: " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                     " vs " + std::to_string(b.width) + "x" + std::to_string(b.height));
  }
  if (a.size() == 0) throw InputError("mse of empty planes");
  int64_t sse = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const int d = int{a.pixels[i]} - int{b.pixels[i]};
    sse += d * d;
  }
  return static_cast<double>(sse) / static_cast<double>(a.size());
}

double psnr(const Plane8& a, const Plane8& b) {
  const double e = mse(a, b);
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / e);
}

RDCurve::RDCurve(std::vector<RDPoint> points) : points_(std::move(points)) {
  if (points_.size() < 4) {
    throw InputError("an RD curve needs at least 4 points, got " + std::to_string(points_.size()));
  }
  for (const auto& p : points_) {
    if (!(p.rate_kbps > 0.0) || !std::isfinite(p.rate_kbps)) throw InputError("RD rates must be positive");
    if (!std::isfinite(p.psnr_db)) throw InputError("RD PSNR values must be finite");
  }
  std::sort(points_.begin(), points_.end(),
            [](const RDPoint& a, const RDPoint& b) { return a.rate_kbps < b.rate_kbps; });
  for (size_t i = 1; i < points_.size(); ++i) {
    if (!(points_[i].rate_kbps > points_[i - 1].rate_kbps) ||
        !(points_[i].psnr_db > points_[i - 1].psnr_db)) {
      throw InputError("RD curve is not strictly monotonic in rate and PSNR");
    }
  }
}

std::array<double, 4> fit_log_rate_cubic(const RDCurve& curve) {
  const auto& pts = curve.points();
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd vander(n, 4);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = pts[static_cast<size_t>(i)].psnr_db;
    vander(i, 0) = 1.0;
    vander(i, 1) = p;
    vander(i, 2) = p * p;
    vander(i, 3) = p * p * p;
    rhs(i) = std::log10(pts[static_cast<size_t>(i)].rate_kbps);
  }
  const Eigen::VectorXd c =
      n == 4 ? Eigen::VectorXd(vander.partialPivLu().solve(rhs)) : Eigen::VectorXd(vander.householderQr().solve(rhs));
  return {c(0), c(1), c(2), c(3)};
}

namespace {

double integrate_cubic(const std::array<double, 4>& c, double lo, double hi) {
  auto primitive = [&](double p) {
    return p * (c[0] + p * (c[1] / 2.0 + p * (c[2] / 3.0 + p * c[3] / 4.0)));
  };
  return primitive(hi) - primitive(lo);
}

}  // namespace

BDResult bd_rate(const RDCurve& anchor, const RDCurve& test) {
  const double lo = std::max(anchor.min_psnr(), test.min_psnr());
  const double hi = std::min(anchor.max_psnr(), test.max_psnr());
  if (!(hi > lo)) {
    throw InputError("RD curves do not overlap in PSNR (overlap [" + std::to_string(lo) + ", " +
                     std::to_string(hi) + "] dB)");
  }
  const double area_anchor = integrate_cubic(fit_log_rate_cubic(anchor), lo, hi);
  const double area_test = integrate_cubic(fit_log_rate_cubic(test), lo, hi);
  const double avg_diff = (area_test - area_anchor) / (hi - lo);
  return BDResult{(std::pow(10.0, avg_diff) - 1.0) * 100.0, lo, hi};
}

double mean_bd_rate(std::span<const double> values) {
  if (values.empty()) throw InputError("mean of an empty BD-rate list");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

std::map<std::string, RDCurve> parse_rd_curves(std::istream& in) {
  std::map<std::string, std::vector<RDPoint>> grouped;
  std::vector<std::string> order;
  int line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line.substr(0, line.find('#')));
    std::vector<std::string> tok;
    for (std::string t; ss >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok.size() != 4) throw ParseError("RD line needs '<name> <qp> <rate_kbps> <psnr_db>'", line_no);
    RDPoint p;
    try {
      (void)std::stoi(tok[1]);
      p.rate_kbps = std::stod(tok[2]);
      p.psnr_db = std::stod(tok[3]);
    } catch (const std::exception&) {
      throw ParseError("non-numeric qp, rate or PSNR", line_no);
    }
    grouped[tok[0]].push_back(p);
  }
  std::map<std::string, RDCurve> curves;
  for (auto& [name, pts] : grouped) {
    try {
      curves.emplace(name, RDCurve(std::move(pts)));
    } catch (const InputError& e) {
      throw InputError("sequence '" + name + "': " + e.what());
    }
  }
  return curves;
}

std::map<std::string, RDCurve> read_rd_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open RD file '" + path + "'");
  try {
    return parse_rd_curves(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.line());
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

RdReport rd_report(const std::vector<MethodCurves>& methods, const std::string& anchor) {
  std::set<std::string> seen;
  for (const auto& m : methods) {
    if (!seen.insert(m.method).second) throw InputError("duplicate method name '" + m.method + "'");
  }
  auto anchor_it = std::find_if(methods.begin(), methods.end(),
                                [&](const MethodCurves& m) { return m.method == anchor; });
  if (anchor_it == methods.end()) throw InputError("anchor '" + anchor + "' is not among the curves");

  RdReport report;
  report.anchor = anchor;
  for (const auto& m : methods) {
    if (m.method == anchor) continue;
    report.methods.push_back(m.method);
    std::vector<double> ok;
    for (const auto& [seq, anchor_curve] : anchor_it->sequences) {
      RdReportRow row{seq, m.method, std::nullopt, {}};
      auto it = m.sequences.find(seq);
      if (it == m.sequences.end()) {
        row.error = "no curve for this sequence";
      } else {
        try {
          row.bd_rate_percent = bd_rate(anchor_curve, it->second).bd_rate_percent;
          ok.push_back(*row.bd_rate_percent);
        } catch (const InputError& e) {
          row.error = e.what();
        }
      }
      report.rows.push_back(std::move(row));
    }
    if (!ok.empty()) report.average[m.method] = mean_bd_rate(ok);
  }
  return report;
}

namespace {

// Values that round to zero at the printed precision lose their sign.
double printable(double v, int decimals) { return std::abs(v) < 0.5 * std::pow(10.0, -decimals) ? 0.0 : v; }

}  // namespace

std::string RdReport::to_csv() const {
  std::ostringstream out;
  out << "sequence,method,bd_rate_percent\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& r : rows) {
    out << r.sequence << ',' << r.method << ',';
    if (r.bd_rate_percent) out << printable(*r.bd_rate_percent, 4);
    else out << "NaN";
    out << '\n';
  }
  for (const auto& m : methods) {
    auto it = average.find(m);
    out << "Average," << m << ',';
    if (it != average.end()) out << printable(it->second, 4);
    else out << "NaN";
    out << '\n';
  }
  return out.str();
}

std::string RdReport::to_text() const {
  size_t name_width = std::string("Average").size();
  for (const auto& r : rows) name_width = std::max(name_width, r.sequence.size());
  std::vector<size_t> widths;
  for (const auto& m : methods) widths.push_back(std::max<size_t>(m.size(), 9));

  std::ostringstream out;
  out << "BD-rate (%) vs " << anchor << '\n';
  out << std::left << std::setw(static_cast<int>(name_width)) << "Sequence";
  for (size_t i = 0; i < methods.size(); ++i) out << "  " << std::right << std::setw(static_cast<int>(widths[i])) << methods[i];
  out << '\n';

  std::vector<std::string> sequences;
  for (const auto& r : rows) {
    if (std::find(sequences.begin(), sequences.end(), r.sequence) == sequences.end()) sequences.push_back(r.sequence);
  }
  std::vector<std::string> notes;
  out << std::fixed << std::setprecision(2);
  for (const auto& seq : sequences) {
    out << std::left << std::setw(static_cast<int>(name_width)) << seq;
    for (size_t i = 0; i < methods.size(); ++i) {
      auto it = std::find_if(rows.begin(), rows.end(),
                             [&](const RdReportRow& r) { return r.sequence == seq && r.method == methods[i]; });
      out << "  " << std::right << std::setw(static_cast<int>(widths[i]));
      if (it != rows.end() && it->bd_rate_percent) {
        out << printable(*it->bd_rate_percent, 2);
      } else {
        out << "error";
        if (it != rows.end()) notes.push_back(seq + " / " + methods[i] + ": " + it->error);
      }
    }
    out << '\n';
  }
  out << std::left << std::setw(static_cast<int>(name_width)) << "Average";
  for (size_t i = 0; i < methods.size(); ++i) {
    auto it = average.find(methods[i]);
    out << "  " << std::right << std::setw(static_cast<int>(widths[i]));
    if (it != average.end()) out << printable(it->second, 2);
    else out << "n/a";
  }
  out << '\n';
  for (const auto& n : notes) out << "  ! " << n << '\n';
  return out.str();
}

}  // namespace bdrrn
