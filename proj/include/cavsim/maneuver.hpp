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

/// @file maneuver.hpp
/// @brief Subject-vehicle state machine and the sub-action sequences that
///        move it from any of its six states to one of four targets.

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "cavsim/road_network.hpp"

namespace cavsim {

enum class SubjectMode : std::uint8_t {
  kLeftFree,
  kRightFree,
  kLeftPlatoonActive,
  kRightPlatoonActive,
  kLeftPlatoonPassive,
  kRightPlatoonPassive,
};

enum class SubAction : std::uint8_t { kWait, kMerge, kSplit, kLaneChange };

enum class TargetState : std::uint8_t { kLeftFree, kLeftPlatoon, kRightFree, kRightPlatoon };

inline constexpr std::array<SubjectMode, 6> kAllModes{
    SubjectMode::kLeftFree,           SubjectMode::kRightFree,
    SubjectMode::kLeftPlatoonActive,  SubjectMode::kRightPlatoonActive,
    SubjectMode::kLeftPlatoonPassive, SubjectMode::kRightPlatoonPassive,
};

inline constexpr std::array<TargetState, 4> kAllTargets{
    TargetState::kLeftFree, TargetState::kLeftPlatoon, TargetState::kRightFree,
    TargetState::kRightPlatoon};

constexpr std::string_view to_string(SubAction a) {
  switch (a) {
    case SubAction::kWait: return "wait";
    case SubAction::kMerge: return "merge";
    case SubAction::kSplit: return "split";
    case SubAction::kLaneChange: return "lane change";
  }
  return "?";
}

constexpr std::string_view to_string(TargetState t) {
  switch (t) {
    case TargetState::kLeftFree: return "left lane; free agent";
    case TargetState::kLeftPlatoon: return "left lane; in platoon";
    case TargetState::kRightFree: return "right lane; free agent";
    case TargetState::kRightPlatoon: return "right lane; in platoon";
  }
  return "?";
}

constexpr std::string_view to_string(SubjectMode m) {
  switch (m) {
    case SubjectMode::kLeftFree: return "left lane; free agent";
    case SubjectMode::kRightFree: return "right lane; free agent";
    case SubjectMode::kLeftPlatoonActive: return "left lane; in platoon (active)";
    case SubjectMode::kRightPlatoonActive: return "right lane; in platoon (active)";
    case SubjectMode::kLeftPlatoonPassive: return "left lane; in platoon (passive)";
    case SubjectMode::kRightPlatoonPassive: return "right lane; in platoon (passive)";
  }
  return "?";
}

constexpr Lane lane_of(SubjectMode m) {
  switch (m) {
    case SubjectMode::kLeftFree:
    case SubjectMode::kLeftPlatoonActive:
    case SubjectMode::kLeftPlatoonPassive:
      return Lane::kLeft;
    default:
      return Lane::kRight;
  }
}

constexpr Lane lane_of(TargetState t) {
  return (t == TargetState::kLeftFree || t == TargetState::kLeftPlatoon) ? Lane::kLeft
                                                                         : Lane::kRight;
}

constexpr bool in_platoon(SubjectMode m) {
  return m != SubjectMode::kLeftFree && m != SubjectMode::kRightFree;
}

constexpr bool is_passive(SubjectMode m) {
  return m == SubjectMode::kLeftPlatoonPassive || m == SubjectMode::kRightPlatoonPassive;
}

constexpr bool in_platoon(TargetState t) {
  return t == TargetState::kLeftPlatoon || t == TargetState::kRightPlatoon;
}

constexpr SubjectMode free_mode(Lane lane) {
  return lane == Lane::kLeft ? SubjectMode::kLeftFree : SubjectMode::kRightFree;
}

constexpr SubjectMode active_mode(Lane lane) {
  return lane == Lane::kLeft ? SubjectMode::kLeftPlatoonActive
                             : SubjectMode::kRightPlatoonActive;
}

constexpr SubjectMode passive_mode(Lane lane) {
  return lane == Lane::kLeft ? SubjectMode::kLeftPlatoonPassive
                             : SubjectMode::kRightPlatoonPassive;
}

/// The target that keeps the subject where it is.
constexpr TargetState hold_target(SubjectMode m) {
  const bool left = lane_of(m) == Lane::kLeft;
  if (in_platoon(m)) return left ? TargetState::kLeftPlatoon : TargetState::kRightPlatoon;
  return left ? TargetState::kLeftFree : TargetState::kRightFree;
}

/// Mode reached once a target is fully attained.
constexpr SubjectMode mode_for(TargetState t) {
  return in_platoon(t) ? active_mode(lane_of(t)) : free_mode(lane_of(t));
}

struct ManeuverPlan {
  TargetState target = TargetState::kRightFree;
  std::vector<SubAction> sequence;
};

namespace detail {

using W = SubAction;
inline constexpr W kW = SubAction::kWait;
inline constexpr W kM = SubAction::kMerge;
inline constexpr W kS = SubAction::kSplit;
inline constexpr W kL = SubAction::kLaneChange;

struct Row {
  std::array<SubAction, 5> actions;
  std::size_t count;
};

// Rows indexed [mode][target] in the enum orders above.
inline constexpr Row kSequenceTable[6][4] = {
    // left lane; free agent
    {{{kW}, 1}, {{kM, kW}, 2}, {{kW, kL, kW}, 3}, {{kW, kL, kM, kW}, 4}},
    // right lane; free agent
    {{{kW, kL, kW}, 3}, {{kW, kL, kM, kW}, 4}, {{kW}, 1}, {{kM, kW}, 2}},
    // left lane; in platoon (active)
    {{{kS, kW}, 2}, {{kW}, 1}, {{kS, kW, kL, kW}, 4}, {{kS, kW, kL, kM, kW}, 5}},
    // right lane; in platoon (active)
    {{{kS, kW, kL, kW}, 4}, {{kS, kW, kL, kM, kW}, 5}, {{kS, kW}, 2}, {{kW}, 1}},
    // left lane; in platoon (passive)
    {{{kS, kW}, 2}, {{kS, kW, kM, kW}, 4}, {{kS, kW, kL, kW}, 4}, {{kS, kW, kL, kM, kW}, 5}},
    // right lane; in platoon (passive)
    {{{kS, kW, kL, kW}, 4}, {{kS, kW, kL, kM, kW}, 5}, {{kS, kW}, 2}, {{kS, kW, kM, kW}, 4}},
};

}  // namespace detail

/// Every state can aim at all four targets.
inline std::span<const TargetState> targets(SubjectMode) { return kAllTargets; }

inline ManeuverPlan sequence(SubjectMode mode, TargetState target) {
  const auto& row = detail::kSequenceTable[static_cast<int>(mode)][static_cast<int>(target)];
  return ManeuverPlan{target, {row.actions.begin(), row.actions.begin() + row.count}};
}

/// Mode after completing one sub-action. Wait never changes the mode.
inline SubjectMode advance(SubjectMode mode, SubAction completed) {
  const Lane lane = lane_of(mode);
  switch (completed) {
    case SubAction::kWait:
      return mode;
    case SubAction::kMerge:
      if (in_platoon(mode)) throw std::logic_error("merge requires a free-agent mode");
      return active_mode(lane);
    case SubAction::kSplit:
      if (!in_platoon(mode)) throw std::logic_error("split requires a platoon mode");
      return free_mode(lane);
    case SubAction::kLaneChange:
      if (in_platoon(mode)) throw std::logic_error("platoon members cannot change lane");
      return free_mode(other_lane(lane));
  }
  throw std::logic_error("unknown sub-action");
}

/// The platoon reached its scheduled splitting position.
inline SubjectMode advance_on_schedule(SubjectMode mode) {
  if (mode == SubjectMode::kLeftPlatoonActive) return SubjectMode::kLeftPlatoonPassive;
  if (mode == SubjectMode::kRightPlatoonActive) return SubjectMode::kRightPlatoonPassive;
  throw std::logic_error("only an active platoon mode reaches its splitting position");
}

}  // namespace cavsim
