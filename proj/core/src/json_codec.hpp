#pragma once

// nlohmann conversions shared by the service and the CLI-facing codecs.

#include "json.hpp"
#include "recd/microtask.hpp"

namespace recd::detail {

using nlohmann::json;

json box_to_json(const BBox& b);
BBox box_from_json(const json& j);

json answer_to_json(const Answer& a);
Answer answer_from_json(const json& j);

json task_to_json(const Microtask& t);
Microtask task_from_json(const json& j);

json response_to_json(const AnnotatorResponse& r);
AnnotatorResponse response_from_json(const json& j);

}  // namespace recd::detail
