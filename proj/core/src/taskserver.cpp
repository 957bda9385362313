#include "attrib/taskserver.hpp"

#include <algorithm>
#include <limits>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "attrib/rng.hpp"

namespace attrib::server {
namespace {

using json = nlohmann::ordered_json;

bool valid_annotator_id(const std::string& id) {
    if (id.empty() || id.size() > 64) return false;
    return std::all_of(id.begin(), id.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '-' || c == '_' || c == '.';
    });
}

Response error(Outcome outcome, std::string message) {
    return {outcome, json{{"error", std::move(message)}}};
}

}  // namespace

int http_status(Outcome outcome) {
    switch (outcome) {
        case Outcome::kOk:
            return 200;
        case Outcome::kNoContent:
            return 204;
        case Outcome::kBadRequest:
            return 400;
        case Outcome::kForbidden:
            return 403;
        case Outcome::kNotFound:
            return 404;
        case Outcome::kConflict:
            return 409;
    }
    return 500;
}

TaskServer::TaskServer(RunStore store, TaskServerConfig config) : store_(std::move(store)), config_(config) {
    seed_ = store_.manifest().seed;
    for (auto& c : store_.corpus()) {
        auto id = c.id;
        claims_.emplace(std::move(id), std::move(c));
    }
    std::size_t order = 0;
    for (auto& t : store_.tasks()) {
        if (!claims_.contains(t.claim_id)) {
            throw PreconditionError(fmt::format("task '{}' refers to unknown claim '{}'", t.task_id, t.claim_id));
        }
        const auto handle = handle_of(t.task_id);
        if (!handles_.emplace(handle, t.task_id).second) throw Error("task handle collision");
        auto id = t.task_id;
        tasks_.emplace(std::move(id), TaskState{std::move(t), order++, {}, {}});
    }
    for (const auto& a : store_.annotations()) {
        if (a.annotator_kind != AnnotatorKind::kHuman) continue;
        auto it = tasks_.find(a.task_id);
        if (it == tasks_.end()) continue;
        auto& state = it->second;
        state.annotators.insert(a.annotator_id);
        auto& p = profiles_[a.annotator_id];
        p.annotator_id = a.annotator_id;
        ++p.completed;
        ++dispensed_[a.annotator_id];
        seen_claims_[a.annotator_id].insert(state.task.claim_id);
        if (state.task.is_control()) {
            record_control(p, recovery::control_answer_correct(state.task, a.prediction, a.none_selected));
        }
    }
}

std::string TaskServer::handle_of(const std::string& task_id) const {
    return "t" + hex64(fnv1a64(fmt::format("{}/{}", seed_, task_id)));
}

void TaskServer::record_control(AnnotatorProfile& p, bool correct) const {
    ++p.controls;
    if (correct) ++p.controls_correct;
    if (static_cast<int>(p.controls) >= config_.min_controls && *p.accuracy() < config_.accuracy_cutoff) {
        p.status = AnnotatorStatus::kDisqualified;
    }
}

bool TaskServer::control_slot(const std::string& annotator_id, std::size_t position) const {
    if (config_.tasks_per_control <= 0) return false;
    const auto block = static_cast<std::size_t>(config_.tasks_per_control) + 1;
    auto engine = substream(seed_, "control-interleave", fmt::format("{}/{}", annotator_id, position / block));
    return position % block == uniform_index(engine, block);
}

TaskServer::TaskState* TaskServer::pick(const std::string& annotator_id, bool control) {
    const auto& seen = seen_claims_[annotator_id];
    TaskState* best = nullptr;
    std::size_t best_load = std::numeric_limits<std::size_t>::max();
    for (auto& [id, state] : tasks_) {
        if (state.task.is_control() != control) continue;
        if (state.annotators.contains(annotator_id) || seen.contains(state.task.claim_id)) continue;
        const std::size_t load = state.annotators.size() + state.outstanding.size();
        if (!control && load >= static_cast<std::size_t>(config_.target_annotations)) continue;
        if (load < best_load || (load == best_load && state.order < best->order)) {
            best = &state;
            best_load = load;
        }
    }
    return best;
}

Response TaskServer::next_task(const std::string& annotator_id) {
    if (!valid_annotator_id(annotator_id)) return error(Outcome::kBadRequest, "invalid annotator id");
    std::lock_guard lock(mutex_);
    auto& p = profiles_[annotator_id];
    p.annotator_id = annotator_id;
    if (p.status == AnnotatorStatus::kDisqualified) return error(Outcome::kForbidden, "annotator disqualified");

    if (auto it = pending_.find(annotator_id); it != pending_.end()) {
        return {Outcome::kOk, client_view(tasks_.at(it->second))};
    }
    TaskState* state = nullptr;
    if (control_slot(annotator_id, dispensed_[annotator_id])) state = pick(annotator_id, true);
    if (state == nullptr) state = pick(annotator_id, false);
    if (state == nullptr) return {Outcome::kNoContent, json::object()};

    state->outstanding.insert(annotator_id);
    pending_[annotator_id] = state->task.task_id;
    seen_claims_[annotator_id].insert(state->task.claim_id);
    ++dispensed_[annotator_id];
    return {Outcome::kOk, client_view(*state)};
}

Response TaskServer::submit(const std::string& annotator_id, const std::string& handle, const Submission& s) {
    if (!valid_annotator_id(annotator_id)) return error(Outcome::kBadRequest, "invalid annotator id");
    std::lock_guard lock(mutex_);
    auto h = handles_.find(handle);
    if (h == handles_.end()) return error(Outcome::kNotFound, "unknown task");
    auto& state = tasks_.at(h->second);
    auto& p = profiles_[annotator_id];
    p.annotator_id = annotator_id;
    if (p.status == AnnotatorStatus::kDisqualified) return error(Outcome::kForbidden, "annotator disqualified");
    if (state.annotators.contains(annotator_id)) return error(Outcome::kConflict, "annotation already submitted");
    if (!state.outstanding.contains(annotator_id)) return error(Outcome::kConflict, "task was not dispensed to this annotator");
    if (s.none_selected == !s.prediction.empty()) {
        return error(Outcome::kBadRequest, "choose sentences or the no-sentence option, not both or neither");
    }
    for (int pos : s.prediction) {
        if (pos < 0 || static_cast<std::size_t>(pos) >= state.task.sentence_count()) {
            return error(Outcome::kBadRequest, fmt::format("sentence {} does not exist", pos));
        }
    }
    if (s.utility && !(*s.utility >= 0.0 && *s.utility <= 100.0)) {
        return error(Outcome::kBadRequest, "utility must be within [0, 100]");
    }

    recovery::AnnotationRecord record;
    record.task_id = state.task.task_id;
    record.annotator_id = annotator_id;
    record.annotator_kind = AnnotatorKind::kHuman;
    record.prediction = s.prediction;
    record.none_selected = s.none_selected;
    record.utility = s.utility;
    record.timestamp = utc_timestamp();
    if (!store_.append_annotation(record)) return error(Outcome::kConflict, "annotation already submitted");

    state.outstanding.erase(annotator_id);
    state.annotators.insert(annotator_id);
    pending_.erase(annotator_id);
    ++p.completed;
    if (state.task.is_control()) {
        record_control(p, recovery::control_answer_correct(state.task, s.prediction, s.none_selected));
        if (p.status == AnnotatorStatus::kDisqualified) {
            spdlog::info("annotator '{}' disqualified at accuracy {:.2f}", annotator_id, *p.accuracy());
        }
    }
    return {Outcome::kOk, json{{"status", "recorded"}}};
}

json TaskServer::client_view(const TaskState& state) const {
    const auto& t = state.task;
    const auto& claim = claims_.at(t.claim_id);
    json evidence = json::array();
    for (const auto& p : claim.evidence) evidence.push_back(json{{"idx", p.index}, {"text", p.text}});
    return json{{"task_id", handle_of(t.task_id)},
                {"claim", claim.claim},
                {"veracity", claim.veracity},
                {"evidence", std::move(evidence)},
                {"target_evidence_idx", t.masked_evidence_idx},
                {"sentences", t.masked.masked_sentences},
                {"numbering_base", t.numbering_base}};
}

json TaskServer::progress() const {
    std::lock_guard lock(mutex_);
    std::size_t regular = 0, controls = 0, open = 0, annotated = 0, annotations = 0, outstanding = 0;
    for (const auto& [id, state] : tasks_) {
        outstanding += state.outstanding.size();
        if (state.task.is_control()) {
            ++controls;
            continue;
        }
        ++regular;
        annotations += state.annotators.size();
        if (!state.annotators.empty()) ++annotated;
        if (state.annotators.size() < static_cast<std::size_t>(config_.target_annotations)) ++open;
    }
    const double wanted = static_cast<double>(regular) * config_.target_annotations;
    json annotators = json::array();
    for (const auto& [id, p] : profiles_) {
        const auto acc = p.accuracy();
        annotators.push_back(json{{"annotator_id", id},
                                  {"completed", p.completed},
                                  {"controls", p.controls},
                                  {"controls_correct", p.controls_correct},
                                  {"accuracy", acc ? json(*acc) : json(nullptr)},
                                  {"status", p.status == AnnotatorStatus::kActive ? "active" : "disqualified"}});
    }
    return json{{"tasks", regular},
                {"control_tasks", controls},
                {"open_tasks", open},
                {"annotated_tasks", annotated},
                {"annotations", annotations},
                {"outstanding", outstanding},
                {"target_per_task", config_.target_annotations},
                {"coverage", wanted > 0 ? static_cast<double>(annotations) / wanted : 0.0},
                {"annotators", std::move(annotators)}};
}

std::optional<AnnotatorProfile> TaskServer::profile(const std::string& annotator_id) const {
    std::lock_guard lock(mutex_);
    auto it = profiles_.find(annotator_id);
    if (it == profiles_.end()) return std::nullopt;
    return it->second;
}

}  // namespace attrib::server
