#include "iclsel/ideology.hpp"

#include <algorithm>
#include <cctype>

namespace iclsel {

std::string_view to_string(Ideology label) {
  switch (label) {
    case Ideology::Liberal:
      return "liberal";
    case Ideology::Neutral:
      return "neutral";
    case Ideology::Conservative:
      return "conservative";
  }
  return "neutral";
}

std::string_view display_name(Ideology label) {
  switch (label) {
    case Ideology::Liberal:
      return "Liberal";
    case Ideology::Neutral:
      return "Neutral";
    case Ideology::Conservative:
      return "Conservative";
  }
  return "Neutral";
}

std::optional<Ideology> parse_ideology(std::string_view text) {
  std::string lowered(text);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (Ideology label : kAllIdeologies) {
    if (lowered == to_string(label)) return label;
  }
  return std::nullopt;
}

}  // namespace iclsel
