#include "attrib/run_store.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace attrib {
namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr const char* kManifest = "manifest.json";
constexpr const char* kCorpus = "corpus.jsonl";
constexpr const char* kExplanations = "explanations.jsonl";
constexpr const char* kTasks = "tasks.jsonl";
constexpr const char* kAnnotations = "annotations.jsonl";

bool valid_run_id(const std::string& id) {
    if (id.empty() || id == "." || id == "..") return false;
    return std::all_of(id.begin(), id.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '-' || c == '_' || c == '.';
    });
}

template <typename F>
void for_each_line(const fs::path& path, F&& f) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            f(json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
        } catch (const ParseError& e) {
            throw ParseError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
        }
    }
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(fmt::format("cannot read {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << content;
        if (!out) throw Error(fmt::format("cannot write {}", tmp.string()));
    }
    fs::rename(tmp, path);
}

}  // namespace

json to_json(const RunManifest& m) {
    json gold = json::object();
    for (const auto& [id, set] : m.gold_choices) gold[id] = std::vector<int>(set.begin(), set.end());
    return json{{"run_id", m.run_id},
                {"seed", m.seed},
                {"generator_id", m.generator_id},
                {"annotator_id", m.annotator_id},
                {"setting", to_string(m.setting)},
                {"evidence_source", to_string(m.evidence_source)},
                {"created_at", m.created_at},
                {"updated_at", m.updated_at},
                {"gold_choices", std::move(gold)}};
}

RunManifest manifest_from_json(const json& j) {
    RunManifest m;
    try {
        m.run_id = j.at("run_id").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.generator_id = j.value("generator_id", "");
        m.annotator_id = j.value("annotator_id", "");
        m.setting = parse_setting(j.at("setting").get<std::string>());
        m.evidence_source = parse_evidence_source(j.at("evidence_source").get<std::string>());
        m.created_at = j.value("created_at", "");
        m.updated_at = j.value("updated_at", "");
        if (auto it = j.find("gold_choices"); it != j.end()) {
            for (const auto& [id, arr] : it->items()) {
                auto v = arr.get<std::vector<int>>();
                m.gold_choices[id] = IndexSet(v.begin(), v.end());
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(fmt::format("malformed manifest: {}", e.what()));
    }
    return m;
}

RunStore::RunStore(fs::path dir, std::shared_ptr<Shared> shared) : dir_(std::move(dir)), shared_(std::move(shared)) {}

bool RunStore::exists(const fs::path& root, const std::string& run_id) {
    return fs::exists(root / run_id / kManifest);
}

RunStore RunStore::create(const fs::path& root, RunManifest manifest) {
    if (!valid_run_id(manifest.run_id)) throw PreconditionError(fmt::format("invalid run id '{}'", manifest.run_id));
    if (exists(root, manifest.run_id)) {
        RunStore store = open(root, manifest.run_id);
        const auto current = store.manifest();
        if (current.seed != manifest.seed || current.setting != manifest.setting ||
            current.evidence_source != manifest.evidence_source) {
            throw PreconditionError(fmt::format(
                "run '{}' already exists with seed {}, setting {}, evidence {}", current.run_id, current.seed,
                to_string(current.setting), to_string(current.evidence_source)));
        }
        return store;
    }
    fs::create_directories(root / manifest.run_id);
    if (manifest.created_at.empty()) manifest.created_at = utc_timestamp();
    manifest.updated_at = manifest.created_at;
    auto shared = std::make_shared<Shared>();
    shared->manifest = std::move(manifest);
    RunStore store(root / shared->manifest.run_id, shared);
    store.save_manifest_locked();
    return store;
}

RunStore RunStore::open(const fs::path& root, const std::string& run_id) {
    if (!valid_run_id(run_id)) throw PreconditionError(fmt::format("invalid run id '{}'", run_id));
    const fs::path dir = root / run_id;
    if (!fs::exists(dir / kManifest)) throw Error(fmt::format("no run '{}' under {}", run_id, root.string()));
    auto shared = std::make_shared<Shared>();
    try {
        shared->manifest = manifest_from_json(json::parse(read_file(dir / kManifest)));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(fmt::format("{}: {}", (dir / kManifest).string(), e.what()));
    }
    RunStore store(dir, shared);
    store.load_keys();
    return store;
}

void RunStore::load_keys() {
    for_each_line(dir_ / kExplanations, [&](const json& j) { shared_->explanation_keys.insert(j.at("claim_id").get<std::string>()); });
    for_each_line(dir_ / kTasks, [&](const json& j) { shared_->task_keys.insert(j.at("task_id").get<std::string>()); });
    for_each_line(dir_ / kAnnotations, [&](const json& j) {
        shared_->annotation_keys.emplace(j.at("task_id").get<std::string>(), j.at("annotator_id").get<std::string>());
    });
}

RunManifest RunStore::manifest() const {
    std::lock_guard lock(shared_->mutex);
    return shared_->manifest;
}

void RunStore::update_manifest(const std::function<void(RunManifest&)>& edit) {
    std::lock_guard lock(shared_->mutex);
    RunManifest m = shared_->manifest;
    edit(m);
    if (m.seed != shared_->manifest.seed || m.setting != shared_->manifest.setting ||
        m.evidence_source != shared_->manifest.evidence_source || m.run_id != shared_->manifest.run_id) {
        throw PreconditionError("run id, seed, setting and evidence source cannot change");
    }
    m.updated_at = utc_timestamp();
    shared_->manifest = std::move(m);
    save_manifest_locked();
}

void RunStore::save_manifest_locked() const {
    write_atomic(dir_ / kManifest, to_json(shared_->manifest).dump(2) + "\n");
}

void RunStore::append_lines_locked(const std::string& file, const std::vector<std::string>& lines) const {
    if (lines.empty()) return;
    std::ofstream out(dir_ / file, std::ios::binary | std::ios::app);
    for (const auto& l : lines) out << l << '\n';
    out.flush();
    if (!out) throw Error(fmt::format("cannot append to {}", (dir_ / file).string()));
}

void RunStore::write_corpus(std::span<const ClaimRecord> records) {
    std::ostringstream ss;
    attrib::write_corpus(ss, records);
    std::lock_guard lock(shared_->mutex);
    write_atomic(dir_ / kCorpus, ss.str());
}

std::vector<ClaimRecord> RunStore::corpus() const {
    std::lock_guard lock(shared_->mutex);
    std::ifstream in(dir_ / kCorpus, std::ios::binary);
    if (!in) return {};
    return parse_corpus(in);
}

std::size_t RunStore::append_explanations(std::span<const ExplanationRecord> records) {
    std::lock_guard lock(shared_->mutex);
    std::vector<std::string> lines;
    for (const auto& r : records) {
        if (shared_->explanation_keys.insert(r.claim_id).second) lines.push_back(to_json(r).dump());
    }
    append_lines_locked(kExplanations, lines);
    return lines.size();
}

std::vector<ExplanationRecord> RunStore::explanations() const {
    std::lock_guard lock(shared_->mutex);
    std::vector<ExplanationRecord> out;
    for_each_line(dir_ / kExplanations, [&](const json& j) { out.push_back(explanation_from_json(j)); });
    return out;
}

std::size_t RunStore::append_tasks(std::span<const recovery::RecoveryTask> tasks) {
    std::lock_guard lock(shared_->mutex);
    std::vector<std::string> lines;
    for (const auto& t : tasks) {
        if (shared_->task_keys.insert(t.task_id).second) lines.push_back(recovery::to_json(t).dump());
    }
    append_lines_locked(kTasks, lines);
    return lines.size();
}

std::vector<recovery::RecoveryTask> RunStore::tasks() const {
    std::lock_guard lock(shared_->mutex);
    std::vector<recovery::RecoveryTask> out;
    for_each_line(dir_ / kTasks, [&](const json& j) { out.push_back(recovery::task_from_json(j)); });
    return out;
}

bool RunStore::append_annotation(const recovery::AnnotationRecord& record) {
    return append_annotations(std::span(&record, 1)) == 1;
}

std::size_t RunStore::append_annotations(std::span<const recovery::AnnotationRecord> records) {
    std::lock_guard lock(shared_->mutex);
    std::vector<std::string> lines;
    for (const auto& r : records) {
        if (shared_->annotation_keys.emplace(r.task_id, r.annotator_id).second) {
            lines.push_back(recovery::to_json(r).dump());
        }
    }
    append_lines_locked(kAnnotations, lines);
    return lines.size();
}

std::vector<recovery::AnnotationRecord> RunStore::annotations() const {
    std::lock_guard lock(shared_->mutex);
    std::vector<recovery::AnnotationRecord> out;
    for_each_line(dir_ / kAnnotations, [&](const json& j) { out.push_back(recovery::annotation_from_json(j)); });
    return out;
}

void RunStore::write_file(const std::string& name, const std::string& content) const {
    if (name.find('/') != std::string::npos || name.empty()) {
        throw PreconditionError(fmt::format("invalid report file name '{}'", name));
    }
    std::lock_guard lock(shared_->mutex);
    write_atomic(dir_ / name, content);
}

}  // namespace attrib
