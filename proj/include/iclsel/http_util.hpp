#pragma once

#include <string>
#include <string_view>

namespace iclsel {

// "https://host:8080/api/v1" -> {"https://host:8080", "/api/v1"}.
struct SplitUrl {
  std::string origin;
  std::string path;
};

SplitUrl split_url(std::string_view url);

}  // namespace iclsel
