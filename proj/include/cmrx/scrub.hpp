#pragma once

#include <array>
#include <string>
#include <string_view>

namespace cmrx {

inline constexpr std::array<std::string_view, 8> kPhiKeywords{
    "MRN", "Name", "DOB", "Date", "Account", "Physician", "Nurse", "Technologist"};

/// Drops every line that contains a PHI keyword as a case-insensitive whole
/// word. Surviving lines are kept byte-exact and in order.
std::string scrub_phi(std::string_view report_text);

/// True if the line contains any PHI keyword as a whole word.
bool line_has_phi(std::string_view line);

}  // namespace cmrx
