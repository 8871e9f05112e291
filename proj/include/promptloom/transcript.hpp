#pragma once

// Run transcripts: one JSON object per line, append-only.

#include <optional>
#include <string>
#include <vector>

#include "promptloom/executor.hpp"

namespace promptloom {

struct TranscriptRecord {
  std::uint64_t seq = 0;
  std::string chain_id;
  RunRecord record;
};

struct TranscriptRead {
  std::vector<TranscriptRecord> records;  // sequence order
  std::vector<std::string> warnings;      // skipped lines
};

// Appends one line under an exclusive advisory lock; seq is one past the
// largest seq already in the file. Returns the seq written. Throws IoError.
std::uint64_t append_transcript(const std::string& path, const std::string& chain_id,
                                const RunRecord& record);

// Corrupt or truncated lines are skipped with a warning. With `chain_id`,
// only that chain's records are returned. Throws IoError.
TranscriptRead read_transcript(const std::string& path,
                               const std::optional<std::string>& chain_id = std::nullopt);

// A line exactly as append_transcript writes it, without the newline.
std::string transcript_line(std::uint64_t seq, const std::string& chain_id,
                            const RunRecord& record);

}  // namespace promptloom
