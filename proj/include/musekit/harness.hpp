#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "musekit/datasets.hpp"
#include "musekit/music.hpp"
#include "musekit/representations.hpp"

namespace musekit {

/// Experiment pipeline constants: songs are downsampled to 4 ticks per
/// quarter, encoded with the 357-token event vocabulary (no velocities,
/// with end-of-sequence) and sliced into non-overlapping windows of 64.
inline constexpr int kExperimentResolution = 4;
inline constexpr int kWindowLength = 64;
inline constexpr int kExperimentVocabulary = 357;

using Window = std::array<std::int32_t, kWindowLength>;

struct PreparedCorpus {
    std::vector<Window> windows;
    int vocabulary = kExperimentVocabulary;
    std::string corpus_name;
    std::string part;  // train | valid | test | all
    std::size_t songs_total = 0;
    std::size_t songs_too_short = 0;  // encodings under one window
    std::size_t songs_failed = 0;     // error items in the stream
};

enum class SplitPart { train, valid, test, all };

const char* split_part_name(SplitPart part);

/// Prepares one corpus (optionally restricted to a split part): adjust to
/// 4 ticks per quarter, encode, window. Honors the manifest's melody_only
/// preprocessing flag.
PreparedCorpus prepare(const CorpusHandle& handle, const DatasetSplit* split,
                       SplitPart part);

/// Same pipeline over in-memory songs (synthetic corpora, tests).
PreparedCorpus prepare_songs(const std::vector<Music>& songs, const std::string& name);

/// Next-token distribution over a fixed vocabulary. Implementations must
/// return probabilities that sum to 1 (within 1e-9) with a strictly
/// positive floor, so log-loss stays finite.
class SequenceModel {
public:
    virtual ~SequenceModel() = default;
    virtual int vocabulary() const = 0;
    virtual void distribution(std::span<const std::int32_t> context,
                              std::vector<double>& probabilities) const = 0;
};

class UniformModel : public SequenceModel {
public:
    explicit UniformModel(int vocabulary) : vocabulary_(vocabulary) {}
    int vocabulary() const override { return vocabulary_; }
    void distribution(std::span<const std::int32_t>,
                      std::vector<double>& probabilities) const override {
        probabilities.assign(std::size_t(vocabulary_), 1.0 / vocabulary_);
    }

private:
    int vocabulary_;
};

/// Additive-smoothed n-gram model:
/// P(token | context) = (count + alpha) / (context_count + alpha * V).
/// Contexts are the last order-1 tokens, shorter at window starts.
class NGramModel : public SequenceModel {
public:
    static constexpr int kMaxOrder = 8;  // context keys pack into 64 bits

    static NGramModel train(const PreparedCorpus& corpus, int order, double alpha);

    int order() const { return order_; }
    double alpha() const { return alpha_; }
    int vocabulary() const override { return vocabulary_; }
    void distribution(std::span<const std::int32_t> context,
                      std::vector<double>& probabilities) const override;

private:
    struct ContextRow {
        std::int64_t total = 0;
        std::unordered_map<std::int32_t, std::int64_t> counts;
    };

    int order_ = 1;
    double alpha_ = 1.0;
    int vocabulary_ = kExperimentVocabulary;
    std::unordered_map<std::uint64_t, ContextRow> rows_;
};

struct PerplexityResult {
    double perplexity = 0.0;
    double log_perplexity = 0.0;  // natural log
    std::int64_t tokens = 0;
    std::size_t samples = 0;
    bool with_replacement = false;
};

/// Draws sample_count windows with a seeded PRNG (without replacement when
/// enough windows exist, with replacement otherwise, flagged) and computes
/// exp(-mean ln P(token | context)).
PerplexityResult perplexity(const SequenceModel& model, const PreparedCorpus& corpus,
                            std::size_t sample_count, std::uint64_t seed);

struct NGramSpec {
    int order = 2;
    double alpha = 0.01;
};

struct CrossMatrix {
    std::vector<std::string> labels;            // sorted by diagonal value
    std::vector<std::vector<double>> log_perplexity;
    std::vector<std::vector<double>> raw_perplexity;

    std::string to_csv() const;
};

/// Trains one model per corpus (train part) and evaluates every model on
/// every corpus (test part). Rows and columns are sorted together by the
/// in-domain (diagonal) log-perplexity.
CrossMatrix cross_matrix(const std::vector<std::pair<PreparedCorpus, PreparedCorpus>>&
                             train_test_pairs,
                         const NGramSpec& spec, std::size_t sample_count,
                         std::uint64_t seed);

enum class UnifiedMode { concatenated, stratified };

/// Pools windows from several prepared corpora. Concatenated keeps all
/// windows; stratified draws `size` windows (corpus uniform, then window
/// uniform). Evaluation corpora are always pooled plain: stratification is
/// a training-time device only.
PreparedCorpus unified_corpus(const std::vector<PreparedCorpus>& parts, UnifiedMode mode,
                              std::uint64_t seed, std::size_t size);

// --- experiment runner --------------------------------------------------------

struct ExperimentCorpus {
    std::string name;
    std::filesystem::path manifest_path;
    std::filesystem::path root;
    CorpusMode mode = CorpusMode::on_the_fly;
};

struct ExperimentConfig {
    std::vector<ExperimentCorpus> corpora;
    NGramSpec model;
    std::array<double, 3> ratios{8, 1, 1};
    std::uint64_t split_seed = 0;
    std::size_t sample_count = 1000;
    std::uint64_t seed = 0;
    bool include_unified = false;
    UnifiedMode unified_mode = UnifiedMode::concatenated;
    std::size_t unified_size = 0;  // 0: match the pooled size

    static ExperimentConfig from_json(std::string_view text);
    static ExperimentConfig load_file(const std::filesystem::path& path);
};

struct ExperimentResult {
    CrossMatrix matrix;
    std::string report_json;  // config echo, seeds, per-corpus window counts
};

ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace musekit
