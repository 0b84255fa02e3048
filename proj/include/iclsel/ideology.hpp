#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace iclsel {

// Three-way ideology label. The enumerator order is the total order used for
// every deterministic tie-break: Liberal < Neutral < Conservative.
enum class Ideology : std::uint8_t { Liberal = 0, Neutral = 1, Conservative = 2 };

inline constexpr std::size_t kNumIdeologies = 3;
inline constexpr std::array<Ideology, kNumIdeologies> kAllIdeologies = {
    Ideology::Liberal, Ideology::Neutral, Ideology::Conservative};

constexpr std::size_t index_of(Ideology label) { return static_cast<std::size_t>(label); }

constexpr Ideology ideology_from_index(std::size_t i) { return static_cast<Ideology>(i); }

// Lowercase wire form: "liberal" / "neutral" / "conservative".
std::string_view to_string(Ideology label);

// Capitalized form used inside prompts: "Liberal" / ...
std::string_view display_name(Ideology label);

// Case-insensitive parse of the wire form; nullopt for anything else.
std::optional<Ideology> parse_ideology(std::string_view text);

}  // namespace iclsel
