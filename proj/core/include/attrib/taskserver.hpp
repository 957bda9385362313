#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "attrib/run_store.hpp"

namespace attrib::server {

struct TaskServerConfig {
    /// Regular tasks per control task; 0 disables controls.
    int tasks_per_control = 5;
    double accuracy_cutoff = 0.7;
    /// Control answers needed before disqualification can trigger.
    int min_controls = 3;
    /// Wanted human annotations per regular task.
    int target_annotations = 5;
};

enum class AnnotatorStatus { kActive, kDisqualified };

struct AnnotatorProfile {
    std::string annotator_id;
    std::size_t completed = 0;
    std::size_t controls = 0;
    std::size_t controls_correct = 0;
    AnnotatorStatus status = AnnotatorStatus::kActive;

    std::optional<double> accuracy() const {
        if (controls == 0) return std::nullopt;
        return static_cast<double>(controls_correct) / static_cast<double>(controls);
    }
};

enum class Outcome {
    kOk,
    kNoContent,
    kBadRequest,
    kForbidden,
    kNotFound,
    kConflict,
};

/// HTTP status code for an outcome.
int http_status(Outcome outcome);

struct Response {
    Outcome outcome = Outcome::kOk;
    nlohmann::ordered_json body;
};

struct Submission {
    IndexSet prediction;
    bool none_selected = false;
    std::optional<double> utility;
};

/// Dispenses recovery tasks of one run to human annotators.
///
/// Regular tasks go least-annotated first (submitted plus outstanding),
/// skipping claims the annotator has already seen. One control task is
/// mixed into every block of tasks_per_control + 1 dispensed tasks at a
/// seeded position. Client payloads carry an opaque task handle and never
/// the answer or the control flag.
class TaskServer {
public:
    TaskServer(RunStore store, TaskServerConfig config = {});

    Response next_task(const std::string& annotator_id);
    Response submit(const std::string& annotator_id, const std::string& handle, const Submission& submission);
    nlohmann::ordered_json progress() const;
    std::optional<AnnotatorProfile> profile(const std::string& annotator_id) const;

    /// Opaque client-side id of a task.
    std::string handle_of(const std::string& task_id) const;

private:
    struct TaskState {
        recovery::RecoveryTask task;
        std::size_t order = 0;
        std::set<std::string> annotators;
        std::set<std::string> outstanding;
    };

    nlohmann::ordered_json client_view(const TaskState& state) const;
    bool control_slot(const std::string& annotator_id, std::size_t position) const;
    TaskState* pick(const std::string& annotator_id, bool control);
    void record_control(AnnotatorProfile& profile, bool correct) const;

    RunStore store_;
    TaskServerConfig config_;
    std::uint64_t seed_ = 0;
    std::map<std::string, ClaimRecord> claims_;
    std::map<std::string, TaskState> tasks_;
    std::map<std::string, std::string> handles_;
    std::map<std::string, AnnotatorProfile> profiles_;
    std::map<std::string, std::set<std::string>> seen_claims_;
    std::map<std::string, std::size_t> dispensed_;
    std::map<std::string, std::string> pending_;
    mutable std::mutex mutex_;
};

}  // namespace attrib::server
