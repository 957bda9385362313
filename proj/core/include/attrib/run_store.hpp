#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "attrib/corpus.hpp"
#include "attrib/recovery.hpp"

namespace attrib {

/// Per-run configuration. Seed, setting and evidence source never change
/// after creation.
struct RunManifest {
    std::string run_id;
    std::uint64_t seed = 0;
    std::string generator_id;
    std::string annotator_id;
    Setting setting = Setting::kSample;
    EvidenceSource evidence_source = EvidenceSource::kHuman;
    std::string created_at;
    std::string updated_at;
    /// Gold subset used per claim in human-evidence runs.
    std::map<std::string, IndexSet> gold_choices;

    bool operator==(const RunManifest&) const = default;
};

ordered_json to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const ordered_json& j);

/// Directory of append-only JSON-lines files for one run:
///
///   <root>/<run_id>/manifest.json
///                   corpus.jsonl
///                   explanations.jsonl
///                   tasks.jsonl
///                   annotations.jsonl
///
/// Appends are deduplicated by record key, so re-running a stage is a no-op.
/// All writes through copies of one RunStore are serialised.
class RunStore {
public:
    /// Creates the run, or opens it if it exists with the same seed, setting
    /// and evidence source. Throws PreconditionError on a conflict.
    static RunStore create(const std::filesystem::path& root, RunManifest manifest);
    static RunStore open(const std::filesystem::path& root, const std::string& run_id);
    static bool exists(const std::filesystem::path& root, const std::string& run_id);

    const std::filesystem::path& dir() const { return dir_; }
    RunManifest manifest() const;
    /// Applies `edit` to the manifest, stamps updated_at and saves it.
    void update_manifest(const std::function<void(RunManifest&)>& edit);

    /// Replaces the corpus snapshot.
    void write_corpus(std::span<const ClaimRecord> records);
    std::vector<ClaimRecord> corpus() const;

    /// Keyed by claim id. Returns the number of new records.
    std::size_t append_explanations(std::span<const ExplanationRecord> records);
    std::vector<ExplanationRecord> explanations() const;

    /// Keyed by task id.
    std::size_t append_tasks(std::span<const recovery::RecoveryTask> tasks);
    std::vector<recovery::RecoveryTask> tasks() const;

    /// Keyed by (task id, annotator id). Returns false for a duplicate.
    bool append_annotation(const recovery::AnnotationRecord& record);
    std::size_t append_annotations(std::span<const recovery::AnnotationRecord> records);
    std::vector<recovery::AnnotationRecord> annotations() const;

    /// Writes `<dir>/<name>` atomically (temp file + rename).
    void write_file(const std::string& name, const std::string& content) const;

private:
    struct Shared {
        std::mutex mutex;
        RunManifest manifest;
        std::set<std::string> explanation_keys;
        std::set<std::string> task_keys;
        std::set<std::pair<std::string, std::string>> annotation_keys;
    };

    RunStore(std::filesystem::path dir, std::shared_ptr<Shared> shared);
    void load_keys();
    void save_manifest_locked() const;
    void append_lines_locked(const std::string& file, const std::vector<std::string>& lines) const;

    std::filesystem::path dir_;
    std::shared_ptr<Shared> shared_;
};

}  // namespace attrib
