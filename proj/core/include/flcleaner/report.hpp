#pragma once
#include <string>

#include "flcleaner/harness.hpp"

namespace flcleaner {

/// Render rounds.csv exactly as emit_reports writes it (canonical formatting,
/// fixed column order: round,acc,recall,fpr,asr,delta,blocked_ids).
std::string rounds_csv(const RunResult& result);

/// Per-client scores: round,client_id,epsilon,accepted.
std::string scores_csv(const RunResult& result);

/// Final metrics + config echo + run id.
std::string summary_json(const RunResult& result);

/// Write rounds.csv, scores.csv, summary.json, the final model checkpoint and
/// (optionally) plots/*.svg under out_dir. Directories are created as needed;
/// I/O failures raise Error with the offending path.
void emit_reports(const RunResult& result, const std::string& out_dir, bool with_plots = false);

} // namespace flcleaner
