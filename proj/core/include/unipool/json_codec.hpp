#pragma once

#include <string>
#include <vector>

#include "unipool/evaluator.hpp"
#include "unipool/query_engine.hpp"
#include "unipool/reasoner.hpp"
#include "unipool/types.hpp"

namespace unipool {

// JSON codecs for records, entries and requirements. Keys are snake_case and
// match the field names. These are interchange codecs; the canonical payload
// serializer in query_engine.hpp is the only bit-exact surface.

std::string raw_record_to_json(const RawRecord& r);
RawRecord raw_record_from_json(const std::string& text);

std::string knowledge_entry_to_json(const KnowledgeEntry& e);
KnowledgeEntry knowledge_entry_from_json(const std::string& text);

std::string requirement_to_json(const QueryRequirement& r);
QueryRequirement requirement_from_json(const std::string& text);

std::string plan_output_to_json(const PlanOutput& p);
PlanOutput plan_output_from_json(const std::string& text);

// Newline-delimited record files (one RawRecord per line).
std::vector<RawRecord> read_record_file(const std::string& path);
void write_record_file(const std::string& path,
                       const std::vector<RawRecord>& records);

}  // namespace unipool
