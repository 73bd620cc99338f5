#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "toolfault/recovery_bank.hpp"

namespace toolfault {

// Parses the Python literal subset used by hand-written recovery
// dictionaries: dicts, lists, tuples, strings (with implicit concatenation
// and parenthesized continuation), numbers, True/False/None, comments and
// trailing commas. An optional leading `name =` is skipped. Throws
// ParseError with a line number.
nlohmann::json parse_python_literal(std::string_view source);

// One action per assistant line, picked by the earliest keyword in its
// "Action:" part; consecutive duplicates collapse and a terminate step is
// appended.
std::vector<RecoveryAction> script_from_dialogue(const std::vector<DialogueLine>& dialogue);

// {branch key: [{"from", "value"}, ...]} source to the grouped bank format
// {"version", "branches": [{key, id_prefix, script, rationale,
// dialogue_template}]}. Branch ids are "G-<key>".
nlohmann::json convert_recovery_dictionary(std::string_view python_source, const std::string& version);

}  // namespace toolfault
