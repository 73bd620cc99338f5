#pragma once

#include <string_view>

namespace toolfault::shipped {

// Versioned failure catalog (core/data/failure_catalog.json).
std::string_view catalog_json();

// Recovery exemplar bank (core/data/recovery_bank.json).
std::string_view bank_json();

}  // namespace toolfault::shipped
