#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace octofunc {

std::string base64_encode(const std::vector<uint8_t>& bytes);
std::vector<uint8_t> base64_decode(std::string_view text);

}  // namespace octofunc
