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

#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bdrrn/plane.hpp"

namespace bdrrn {

double mse(const Plane8& a, const Plane8& b);

// 10*log10(255^2 / mse); identical planes give +infinity.
double psnr(const Plane8& a, const Plane8& b);

struct RDPoint {
  double rate_kbps = 0.0;
  double psnr_db = 0.0;
};

// At least four points, strictly increasing in both rate and PSNR once
// sorted by rate. Construction validates; nothing is silently reordered
// beyond the sort by rate.
class RDCurve {
 public:
  explicit RDCurve(std::vector<RDPoint> points);
  const std::vector<RDPoint>& points() const { return points_; }
  double min_psnr() const { return points_.front().psnr_db; }
  double max_psnr() const { return points_.back().psnr_db; }

 private:
  std::vector<RDPoint> points_;
};

// log10(rate) as a cubic in PSNR: c[0] + c[1] p + c[2] p^2 + c[3] p^3.
// Exact interpolation for four points, least squares above that.
std::array<double, 4> fit_log_rate_cubic(const RDCurve& curve);

struct BDResult {
  double bd_rate_percent = 0.0;  // negative means the test curve saves bitrate
  double overlap_lo_db = 0.0;
  double overlap_hi_db = 0.0;
};

BDResult bd_rate(const RDCurve& anchor, const RDCurve& test);

double mean_bd_rate(std::span<const double> values);

// Rows of `<name> <qp> <rate_kbps> <psnr_db>`, grouped into one curve per name.
std::map<std::string, RDCurve> parse_rd_curves(std::istream& in);
std::map<std::string, RDCurve> read_rd_file(const std::string& path);

struct MethodCurves {
  std::string method;
  std::map<std::string, RDCurve> sequences;
};

struct RdReportRow {
  std::string sequence;
  std::string method;
  std::optional<double> bd_rate_percent;
  std::string error;  // set when bd_rate_percent is empty
};

struct RdReport {
  std::string anchor;
  std::vector<std::string> methods;  // non-anchor, in input order
  std::vector<RdReportRow> rows;
  std::map<std::string, double> average;  // over successful rows per method

  std::string to_csv() const;
  std::string to_text() const;
};

// BD-rate of every non-anchor method against the anchor, per sequence the
// anchor defines. Throws before computing anything if the anchor is missing
// or method names repeat; per-row failures are recorded on the row.
RdReport rd_report(const std::vector<MethodCurves>& methods, const std::string& anchor);

}  // namespace bdrrn
