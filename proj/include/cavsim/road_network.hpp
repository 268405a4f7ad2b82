// Copyright 2026 The cavsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/// @file road_network.hpp
/// @brief Straight two-lane highway split into road pieces.
///
/// Coordinates are longitudinal meters from the trip origin. Pieces are
/// left-closed/right-open, so a vehicle standing exactly on a boundary
/// belongs to the downstream piece. Ramps sit at the midpoint of their piece.

#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cavsim/parameters.hpp"

namespace cavsim {

enum class Lane : std::uint8_t { kRight = 0, kLeft = 1 };

inline constexpr Lane other_lane(Lane lane) {
  return lane == Lane::kRight ? Lane::kLeft : Lane::kRight;
}

inline constexpr std::size_t lane_index(Lane lane) {
  return static_cast<std::size_t>(lane);
}

inline constexpr char lane_code(Lane lane) {
  return lane == Lane::kRight ? 'R' : 'L';
}

struct RoadPiece {
  int index = 0;  // 1-based
  double length = 0.0;
  bool has_onramp = false;
  bool has_offramp = false;
  double start_x = 0.0;

  [[nodiscard]] double end_x() const { return start_x + length; }
  [[nodiscard]] double ramp_x() const { return start_x + 0.5 * length; }
};

/// Longest piece a single roadside unit can cover.
inline constexpr double kMaxPieceLength = 600.0;

class RoadNetwork {
 public:
  struct PieceSpec {
    double length;
    bool onramp;
    bool offramp;
  };

  RoadNetwork() = default;

  RoadNetwork(const std::vector<PieceSpec>& specs, double v_max_right,
              double v_max_left, double v_m_right, double v_m_left)
      : v_max_{v_max_right, v_max_left}, v_m_{v_m_right, v_m_left} {
    if (specs.empty()) throw std::invalid_argument("network needs at least one piece");
    double x = 0.0;
    int index = 1;
    for (const auto& s : specs) {
      if (!(s.length > 0.0) || s.length > kMaxPieceLength) {
        throw std::invalid_argument("road piece length must be in (0, 600] m");
      }
      pieces_.push_back(RoadPiece{index++, s.length, s.onramp, s.offramp, x});
      x += s.length;
    }
    total_length_ = x;
  }

  [[nodiscard]] const std::vector<RoadPiece>& pieces() const { return pieces_; }
  [[nodiscard]] double total_length() const { return total_length_; }
  [[nodiscard]] static constexpr int lane_count() { return 2; }
  [[nodiscard]] double v_max(Lane lane) const { return v_max_[lane_index(lane)]; }
  [[nodiscard]] double v_m(Lane lane) const { return v_m_[lane_index(lane)]; }

  [[nodiscard]] const RoadPiece& piece(int index) const {
    if (index < 1 || index > static_cast<int>(pieces_.size())) {
      throw std::out_of_range("road piece index out of range");
    }
    return pieces_[static_cast<std::size_t>(index - 1)];
  }

  /// 1-based index of the piece containing x.
  [[nodiscard]] int piece_at(double x) const {
    check_range(x);
    auto it = std::upper_bound(pieces_.begin(), pieces_.end(), x,
                               [](double v, const RoadPiece& p) { return v < p.start_x; });
    return std::prev(it)->index;
  }

  /// Smallest piece boundary strictly greater than x, or total_length.
  [[nodiscard]] double next_transition(double x) const {
    check_range(x);
    const RoadPiece& p = piece(piece_at(x));
    return p.end_x();
  }

  /// Interior boundaries between consecutive pieces, ascending.
  [[nodiscard]] std::vector<double> transitions() const {
    std::vector<double> out;
    for (std::size_t i = 1; i < pieces_.size(); ++i) out.push_back(pieces_[i].start_x);
    return out;
  }

  /// Number of interior boundaries in the half-open interval (from, to].
  [[nodiscard]] int transitions_crossed(double from, double to) const {
    int n = 0;
    for (std::size_t i = 1; i < pieces_.size(); ++i) {
      const double b = pieces_[i].start_x;
      if (from < b && b <= to) ++n;
    }
    return n;
  }

  [[nodiscard]] std::vector<double> onramp_points() const {
    std::vector<double> out;
    for (const auto& p : pieces_) {
      if (p.has_onramp) out.push_back(p.ramp_x());
    }
    return out;
  }

  [[nodiscard]] std::vector<double> offramp_points() const {
    std::vector<double> out;
    for (const auto& p : pieces_) {
      if (p.has_offramp) out.push_back(p.ramp_x());
    }
    return out;
  }

 private:
  void check_range(double x) const {
    if (!(x >= 0.0 && x < total_length_)) {
      throw std::domain_error("position outside the road network");
    }
  }

  std::vector<RoadPiece> pieces_;
  double total_length_ = 0.0;
  double v_max_[2] = {0.0, 0.0};
  double v_m_[2] = {0.0, 0.0};
};

/// The 10.8 km reference highway: 20 pieces, on-ramps on pieces 1 and 18,
/// off-ramps on pieces 4, 12 and 20.
inline RoadNetwork build_reference_network(const ModelParams& p = {}) {
  std::vector<RoadNetwork::PieceSpec> specs;
  for (int i = 1; i <= 20; ++i) {
    double length = 600.0;
    if (i == 1) length = 400.0;
    if (i == 4) length = 300.0;
    if (i == 12) length = 200.0;
    if (i == 18) length = 300.0;
    specs.push_back({length, i == 1 || i == 18, i == 4 || i == 12 || i == 20});
  }
  return RoadNetwork(specs, p.v_max_right, p.v_max_left, p.v_m_right, p.v_m_left);
}

/// Parses a layout file with one `piece LENGTH [onramp] [offramp]` line per
/// piece. Blank lines and `#` comments are ignored.
inline RoadNetwork parse_network(std::istream& in, const ModelParams& p = {}) {
  std::vector<RoadNetwork::PieceSpec> specs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word)) continue;
    if (word != "piece") {
      throw std::invalid_argument("network line " + std::to_string(line_no) +
                                  ": expected 'piece'");
    }
    RoadNetwork::PieceSpec spec{0.0, false, false};
    if (!(ls >> spec.length)) {
      throw std::invalid_argument("network line " + std::to_string(line_no) +
                                  ": missing length");
    }
    while (ls >> word) {
      if (word == "onramp") {
        spec.onramp = true;
      } else if (word == "offramp") {
        spec.offramp = true;
      } else {
        throw std::invalid_argument("network line " + std::to_string(line_no) +
                                    ": unknown flag '" + word + "'");
      }
    }
    specs.push_back(spec);
  }
  return RoadNetwork(specs, p.v_max_right, p.v_max_left, p.v_m_right, p.v_m_left);
}

}  // namespace cavsim
