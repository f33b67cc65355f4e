#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace gnmr {

/// Column order of the 24 channels in a C-MAPSS row after (unit, cycle):
/// three operating settings followed by the 21 sensors.
inline constexpr std::array<std::string_view, 24> kChannelNames = {
    "setting1", "setting2", "setting3", "T2",   "T24",    "T30",     "T50",    "P2",
    "P15",      "P30",      "Nf",       "Nc",   "epr",    "Ps30",    "phi",    "NRf",
    "NRc",      "BPR",      "farB",     "htBleed", "Nf_dmd", "PCNfR_dmd", "W31", "W32"};

inline constexpr std::size_t kChannelCount = kChannelNames.size();
inline constexpr std::size_t kSettingCount = 3;
inline constexpr std::size_t kSensorCount = kChannelCount - kSettingCount;

inline std::optional<std::size_t> channel_index(std::string_view name) {
  for (std::size_t i = 0; i < kChannelNames.size(); ++i) {
    if (kChannelNames[i] == name) return i;
  }
  return std::nullopt;
}

}  // namespace gnmr
