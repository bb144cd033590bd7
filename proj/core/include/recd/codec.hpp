#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "recd/microtask.hpp"

namespace recd {

/// Wire format of answers: a semantic answer is its option string, a single
/// box is [l, t, r, b], a direct-box answer is {"boxes": [[l, t, r, b], ...]}
/// and keypoints are {"points": [[x, y], ...]}.
std::string answer_to_json(const Answer& answer);
Answer answer_from_json(std::string_view text);

std::string microtask_to_json(const Microtask& task);
Microtask microtask_from_json(std::string_view text);

std::string response_to_json(const AnnotatorResponse& response);
AnnotatorResponse response_from_json(std::string_view text);

/// JSON-lines response logs, one response per line.
void write_responses(std::ostream& out, const std::vector<AnnotatorResponse>& responses);
std::vector<AnnotatorResponse> read_responses(std::istream& in);

void write_microtasks(std::ostream& out, const std::vector<Microtask>& tasks);
std::vector<Microtask> read_microtasks(std::istream& in);

}  // namespace recd
