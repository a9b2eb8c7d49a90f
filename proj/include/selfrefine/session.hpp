#pragma once

#include <memory>
#include <optional>
#include <string>

#include "selfrefine/backends.hpp"
#include "selfrefine/cache.hpp"
#include "selfrefine/engine.hpp"
#include "selfrefine/tasks.hpp"

namespace selfrefine {

// Ablation switch for the critique step. Generic substitutes a fixed string
// for the model critique; None drops feedback from refine prompts entirely.
enum class FeedbackMode { Specific, Generic, None };

const char* feedback_mode_name(FeedbackMode mode);
FeedbackMode feedback_mode_from_name(const std::string& name);

// Distinct models may serve each role (mixed-refine setups); point all three
// at one backend for the single-model loop.
struct RoleBackends {
    std::shared_ptr<Backend> init;
    std::shared_ptr<Backend> feedback;
    std::shared_ptr<Backend> refine;
};

struct SessionOptions {
    FeedbackMode feedback_mode = FeedbackMode::Specific;
    std::optional<std::string> generic_feedback;   // overrides the task default
    std::optional<StopPolicy> stop_policy;         // overrides the task default
    std::optional<HistoryLimits> history_limits;   // overrides the task default
    OraclePredicate oracle;        // consulted only when the policy asks for it
    ResponseCache* cache = nullptr;
    std::string config_fingerprint;
};

// Runs one full generate/feedback/refine session. Backend failures yield a
// partial trace with termination Error instead of propagating, so batch runs
// keep going; everything else (bad templates, bad config) throws.
Trace run_session(const TaskSpec& task, const Instance& instance, const RoleBackends& backends,
                  const SessionOptions& options = {});

// The loop's view of a model reply: the task's extraction rule when it
// applies, the trimmed reply otherwise.
std::string candidate_from_reply(const std::string& reply, const TaskSpec& task);

} // namespace selfrefine
