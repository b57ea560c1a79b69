#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace qemind {

/// Raised for every contract violation and malformed input in the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A whitespace-tokenized sentence. Tokens never contain tabs or newlines.
using TokenSeq = std::vector<std::string>;

inline constexpr std::string_view kMaskToken = "<mask>";
inline constexpr std::string_view kUnkToken = "<unk>";

TokenSeq tokenize(std::string_view text);
std::string join_tokens(const TokenSeq& tokens);

enum class Task { DA, CED };
enum class CedLabel { NOT, ERR };

std::string_view to_string(Task task);
Task parse_task(std::string_view text);
std::string_view to_string(CedLabel label);

/// DA labels are z-standardized real scores; CED labels are NOT/ERR classes.
using Label = std::variant<double, CedLabel>;

struct QESample {
  std::string id;
  std::string lang_pair;
  TokenSeq src;
  TokenSeq mt;
  Label label;

  bool operator==(const QESample&) const = default;
};

struct Dataset {
  Task task = Task::DA;
  std::vector<QESample> samples;

  bool operator==(const Dataset&) const = default;
};

bool is_valid_lang_pair(std::string_view lang_pair);

/// Parses the dataset TSV (`id lang_pair src mt label`). Errors name the offending line.
Dataset parse_dataset(std::istream& in, Task task);
Dataset load_dataset(const std::filesystem::path& path, Task task);

/// Guesses the task from the label column: all NOT/ERR means CED, otherwise DA.
Task detect_task(const std::filesystem::path& path);

void write_dataset(const Dataset& dataset, std::ostream& out);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

/// Duplicates minority-class samples per language pair until both classes
/// have equal counts. Duplicates get ids of the form `<id>#up<k>`.
Dataset upsample_minority(const Dataset& dataset, std::uint64_t seed);

enum class MixStrategy { AsIs, EnglishFirst };

MixStrategy parse_mix_strategy(std::string_view text);

/// Concatenates datasets. EnglishFirst swaps `xx-en` samples to `en-xx`.
Dataset mix_multilingual(std::span<const Dataset> datasets, MixStrategy strategy);

}  // namespace qemind
