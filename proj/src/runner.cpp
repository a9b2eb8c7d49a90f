#include "selfrefine/runner.hpp"

#include <unistd.h>

#include <atomic>
#include <condition_variable>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "selfrefine/digest.hpp"
#include "selfrefine/error.hpp"
#include "selfrefine/eval.hpp"
#include "selfrefine/trace_io.hpp"

namespace selfrefine {

using nlohmann::json;

namespace {

constexpr const char* kScriptedPrefix = "scripted:";

bool is_scripted_spec(const std::string& spec) { return spec.rfind(kScriptedPrefix, 0) == 0; }

std::string read_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw io_error("cannot read " + file.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

// Reply script: a JSON array of strings is one global queue (single worker
// only); an array of arrays is one private queue per dataset instance.
struct ScriptSource {
    bool global = false;
    std::vector<std::string> global_replies;
    std::vector<std::vector<std::string>> per_instance;
    std::string content_hash;
};

ScriptSource load_script(const std::filesystem::path& file) {
    std::string text = read_file(file);
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_array()) {
        throw config_error("reply script " + file.string() + " must be a JSON array");
    }
    ScriptSource source;
    source.content_hash = sha256_hex(text);
    if (doc.empty()) throw config_error("reply script " + file.string() + " is empty");
    if (doc[0].is_string()) {
        source.global = true;
        for (const auto& item : doc) {
            if (!item.is_string()) {
                throw config_error("reply script " + file.string() +
                                   " mixes strings and arrays");
            }
            source.global_replies.push_back(item.get<std::string>());
        }
        return source;
    }
    for (const auto& row : doc) {
        if (!row.is_array()) {
            throw config_error("reply script " + file.string() + " mixes strings and arrays");
        }
        std::vector<std::string> replies;
        for (const auto& item : row) {
            if (!item.is_string()) {
                throw config_error("reply script " + file.string() +
                                   " has a non-string reply");
            }
            replies.push_back(item.get<std::string>());
        }
        source.per_instance.push_back(std::move(replies));
    }
    return source;
}

json load_profiles(const std::filesystem::path& file) {
    if (file.empty()) throw config_error("backend profile requested but no profiles file given");
    json doc = json::parse(read_file(file), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw config_error("profiles file " + file.string() + " must be a JSON object");
    }
    return doc;
}

std::string run_command_capture(const std::string& command) {
    FILE* pipe = popen(command.c_str(), "r");
    if (!pipe) return "";
    std::string output;
    char buf[256];
    while (std::size_t got = std::fread(buf, 1, sizeof(buf), pipe)) output.append(buf, got);
    pclose(pipe);
    return output;
}

std::string shell_quote(const std::string& s) {
    std::string quoted = "'";
    for (char c : s) {
        if (c == '\'') quoted += "'\\''";
        else quoted += c;
    }
    quoted += "'";
    return quoted;
}

// Correctness check for program-shaped candidates: run the function and
// compare its printed result against the reference answer.
bool python_oracle(const std::string& candidate, const std::string& gold) {
    static std::atomic<unsigned> counter{0};
    auto path = std::filesystem::temp_directory_path() /
                ("selfrefine_oracle_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)) + ".py");
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) return false;
        out << candidate << "\n\nprint(solution())\n";
    }
    std::string output =
        run_command_capture("timeout 10 python3 " + shell_quote(path.string()) + " 2>/dev/null");
    std::error_code ec;
    std::filesystem::remove(path, ec);
    while (!output.empty() && (output.back() == '\n' || output.back() == '\r')) output.pop_back();
    if (output.empty()) return false;
    auto last_line = output.rfind('\n');
    if (last_line != std::string::npos) output = output.substr(last_line + 1);
    return answers_match(output, gold);
}

} // namespace

BackendProfile profile_from_json(const std::string& name, const json& doc) {
    if (!doc.is_object()) throw config_error("profile '" + name + "' must be a JSON object");
    BackendProfile profile;
    profile.name = name;
    profile.endpoint = doc.value("endpoint", "");
    profile.model = doc.value("model", "");
    profile.temperature = doc.value("temperature", 0.7);
    profile.max_tokens = doc.value("max_tokens", 512);
    if (doc.contains("api_style")) {
        profile.api_style = api_style_from_name(doc["api_style"].get<std::string>());
    }
    profile.path = doc.value("path", profile.default_path());
    profile.auth_env = doc.value("auth_env", "");
    if (doc.contains("retry")) {
        profile.retry.max_attempts = doc["retry"].value("max_attempts", 3);
        profile.retry.base_backoff_ms = doc["retry"].value("base_backoff_ms", 250);
    }
    profile.rate_limit_per_minute = doc.value("rate_limit_per_minute", 0);
    if (profile.endpoint.empty()) {
        throw config_error("profile '" + name + "' has no endpoint");
    }
    return profile;
}

namespace {

json backend_description(const std::string& spec,
                         const std::map<std::string, ScriptSource>& scripts,
                         const json& profiles) {
    if (is_scripted_spec(spec)) {
        return {{"scripted", scripts.at(spec).content_hash}};
    }
    if (!profiles.contains(spec)) {
        throw config_error("unknown backend profile '" + spec + "'");
    }
    BackendProfile p = profile_from_json(spec, profiles[spec]);
    return {{"name", p.name},           {"endpoint", p.endpoint},
            {"path", p.path},           {"model", p.model},
            {"temperature", p.temperature}, {"max_tokens", p.max_tokens},
            {"api_style", api_style_name(p.api_style)}};
}

} // namespace

std::string config_fingerprint_for(const RunConfig& config, const TaskSpec& task,
                                   const StopPolicy& policy) {
    std::map<std::string, ScriptSource> scripts;
    for (const std::string& spec :
         {config.backend_init, config.backend_feedback, config.backend_refine}) {
        if (is_scripted_spec(spec) && !scripts.count(spec)) {
            scripts[spec] = load_script(spec.substr(std::string(kScriptedPrefix).size()));
        }
    }
    json profiles = json::object();
    for (const std::string& spec :
         {config.backend_init, config.backend_feedback, config.backend_refine}) {
        if (!is_scripted_spec(spec) && profiles.empty()) {
            profiles = load_profiles(config.profiles_path);
            break;
        }
    }
    json doc;
    doc["task"] = task.id;
    doc["backends"] = {{"init", backend_description(config.backend_init, scripts, profiles)},
                       {"feedback",
                        backend_description(config.backend_feedback, scripts, profiles)},
                       {"refine", backend_description(config.backend_refine, scripts, profiles)}};
    doc["stop"] = {{"max_iterations", policy.max_iterations},
                   {"stop_phrases", policy.stop_phrases},
                   {"use_oracle", policy.use_oracle}};
    if (policy.min_total_score) doc["stop"]["min_total_score"] = *policy.min_total_score;
    doc["feedback_mode"] = feedback_mode_name(config.feedback_mode);
    doc["generic_feedback"] = config.generic_feedback.value_or(task.generic_feedback);
    doc["seed"] = config.seed_label;
    return sha256_hex(doc.dump());
}

RunOutcome run_batch(const RunConfig& config) {
    TaskRegistry registry(config.prompt_dir);
    if (!registry.has(config.task_id)) {
        throw config_error("unknown task '" + config.task_id + "'");
    }
    const TaskSpec& task = registry.get(config.task_id);
    std::vector<Instance> instances = load_dataset(task, config.input_path);
    if (config.trace_path.empty()) throw config_error("run needs a trace output path");
    if (config.workers < 1) throw config_error("workers must be at least 1");

    StopPolicy policy = task.stop_policy;
    if (config.max_iterations) policy.max_iterations = *config.max_iterations;
    if (config.min_total_score) policy.min_total_score = *config.min_total_score;

    // Resolve each distinct backend spec once. Global reply queues are shared
    // mutable state, so they cap the pool at one worker to keep consumption
    // order well defined.
    std::map<std::string, ScriptSource> scripts;
    std::map<std::string, std::shared_ptr<Backend>> shared;
    json profiles = json::object();
    bool any_global = false;
    for (const std::string& spec :
         {config.backend_init, config.backend_feedback, config.backend_refine}) {
        if (is_scripted_spec(spec)) {
            if (!scripts.count(spec)) {
                scripts[spec] = load_script(spec.substr(std::string(kScriptedPrefix).size()));
                const ScriptSource& source = scripts[spec];
                if (source.global) {
                    any_global = true;
                    shared[spec] = std::make_shared<ScriptedBackend>(source.global_replies);
                } else if (source.per_instance.size() < instances.size()) {
                    throw config_error("reply script for '" + spec + "' covers " +
                                       std::to_string(source.per_instance.size()) +
                                       " instances but the dataset has " +
                                       std::to_string(instances.size()));
                }
            }
        } else if (!shared.count(spec)) {
            if (profiles.empty()) profiles = load_profiles(config.profiles_path);
            if (!profiles.contains(spec)) {
                throw config_error("unknown backend profile '" + spec + "'");
            }
            shared[spec] = std::make_shared<HttpBackend>(profile_from_json(spec, profiles[spec]));
        }
    }
    if (any_global && config.workers > 1) {
        throw config_error("a shared reply queue requires --workers 1");
    }

    std::optional<ResponseCache> cache;
    if (!config.cache_dir.empty()) cache.emplace(config.cache_dir, config.cache_read_only);

    std::string fingerprint = config_fingerprint_for(config, task, policy);

    SessionOptions base_options;
    base_options.feedback_mode = config.feedback_mode;
    base_options.generic_feedback = config.generic_feedback;
    base_options.stop_policy = policy;
    base_options.cache = cache ? &*cache : nullptr;
    base_options.config_fingerprint = fingerprint;
    if (policy.use_oracle && config.exec_oracle) {
        base_options.oracle = [](const Instance& instance, const std::string& candidate) {
            return !instance.gold_answer.empty() &&
                   python_oracle(candidate, instance.gold_answer);
        };
    }

    auto backends_for = [&](std::size_t index) {
        std::map<std::string, std::shared_ptr<Backend>> local;
        auto resolve = [&](const std::string& spec) -> std::shared_ptr<Backend> {
            auto it = shared.find(spec);
            if (it != shared.end()) return it->second;
            auto local_it = local.find(spec);
            if (local_it != local.end()) return local_it->second;
            auto backend =
                std::make_shared<ScriptedBackend>(scripts.at(spec).per_instance[index]);
            local[spec] = backend;
            return backend;
        };
        RoleBackends backends;
        backends.init = resolve(config.backend_init);
        backends.feedback = resolve(config.backend_feedback);
        backends.refine = resolve(config.backend_refine);
        return backends;
    };

    std::vector<std::optional<Trace>> results(instances.size());
    std::atomic<std::size_t> next{0};
    std::mutex mutex;
    std::condition_variable ready;

    auto worker = [&]() {
        for (;;) {
            std::size_t index = next.fetch_add(1);
            if (index >= instances.size()) return;
            Trace trace;
            try {
                trace = run_session(task, instances[index], backends_for(index), base_options);
            } catch (const Error& e) {
                trace.task_id = task.id;
                trace.input = instances[index].input;
                trace.termination = Termination::Error;
                trace.error = e.what();
                trace.config_fingerprint = fingerprint;
            }
            std::lock_guard<std::mutex> lock(mutex);
            results[index] = std::move(trace);
            ready.notify_all();
        }
    };

    std::size_t pool_size =
        std::min<std::size_t>(static_cast<std::size_t>(config.workers), instances.size());
    std::vector<std::thread> pool;
    pool.reserve(pool_size);
    for (std::size_t i = 0; i < pool_size; ++i) pool.emplace_back(worker);

    RunOutcome outcome;
    outcome.instances = static_cast<long>(instances.size());
    outcome.fingerprint = fingerprint;
    // Single writer, dataset order, flushed the moment each line's turn
    // comes; a crash loses only the suffix.
    for (std::size_t write_index = 0; write_index < instances.size(); ++write_index) {
        std::unique_lock<std::mutex> lock(mutex);
        ready.wait(lock, [&] { return results[write_index].has_value(); });
        Trace trace = std::move(*results[write_index]);
        results[write_index].reset();
        lock.unlock();
        if (trace.termination == Termination::Error) ++outcome.errors;
        append_trace_line(config.trace_path, trace);
        std::fprintf(stderr, "[%zu/%zu] %s %s\n", write_index + 1, instances.size(),
                     instances[write_index].id.c_str(), termination_name(trace.termination));
    }
    for (auto& thread : pool) thread.join();
    return outcome;
}

namespace {

std::vector<Trace> load_traces_checked(const EvalConfig& config) {
    if (config.trace_files.empty()) throw config_error("eval needs at least one trace file");
    std::vector<Trace> traces;
    for (const auto& file : config.trace_files) {
        auto batch = read_trace_file(file);
        traces.insert(traces.end(), std::make_move_iterator(batch.begin()),
                      std::make_move_iterator(batch.end()));
    }
    if (traces.empty()) throw config_error("trace files contain no traces");
    if (!config.allow_mixed) {
        std::set<std::string> fingerprints;
        for (const auto& trace : traces) fingerprints.insert(trace.config_fingerprint);
        if (fingerprints.size() > 1) {
            throw config_error("trace files mix " + std::to_string(fingerprints.size()) +
                               " config fingerprints; pass --allow-mixed to combine them");
        }
    }
    return traces;
}

const TaskSpec& single_task(const TaskRegistry& registry, const std::vector<Trace>& traces,
                            const std::string& mode) {
    for (const auto& trace : traces) {
        if (trace.task_id != traces.front().task_id) {
            throw config_error("eval mode '" + mode + "' needs traces from a single task");
        }
    }
    if (!registry.has(traces.front().task_id)) {
        throw config_error("trace references unknown task '" + traces.front().task_id + "'");
    }
    return registry.get(traces.front().task_id);
}

std::shared_ptr<Backend> evaluator_backend(const EvalConfig& config) {
    if (config.evaluator.empty()) throw config_error("this eval mode needs --evaluator");
    if (is_scripted_spec(config.evaluator)) {
        ScriptSource source =
            load_script(config.evaluator.substr(std::string(kScriptedPrefix).size()));
        if (!source.global) {
            throw config_error("judge reply scripts must be a flat array of strings");
        }
        return std::make_shared<ScriptedBackend>(source.global_replies);
    }
    json profiles = load_profiles(config.profiles_path);
    if (!profiles.contains(config.evaluator)) {
        throw config_error("unknown backend profile '" + config.evaluator + "'");
    }
    return std::make_shared<HttpBackend>(
        profile_from_json(config.evaluator, profiles[config.evaluator]));
}

std::string judge_context(const TaskSpec& task, const Trace& trace, const EvalConfig& config) {
    if (task.judge_kind == JudgeKind::Sentiment) {
        if (config.target_context.empty()) {
            throw config_error("sentiment judging needs --context with the target sentiment");
        }
        return config.target_context;
    }
    return trace.input;
}

const IterationRecord& selected_record(const Trace& trace) {
    return trace.records[trace.selected_index.value_or(trace.records.size() - 1)];
}

json interval_json(const Interval& interval) {
    return {{"ci_low", interval.low}, {"ci_high", interval.high}};
}

} // namespace

json run_eval(const EvalConfig& config) {
    json report;
    report["mode"] = config.mode;
    report["z"] = config.z;

    if (config.mode == "wilson") {
        if (config.successes < 0 || config.trials < 0) {
            throw config_error("wilson mode needs --successes and --n");
        }
        Interval interval = wilson_interval(config.successes, config.trials, config.z);
        report["successes"] = config.successes;
        report["n"] = config.trials;
        report["rate"] =
            static_cast<double>(config.successes) / static_cast<double>(config.trials);
        report.update(interval_json(interval));
        return report;
    }

    TaskRegistry registry(config.prompt_dir);
    std::vector<Trace> traces = load_traces_checked(config);

    if (config.mode == "report") {
        auto rows = build_report(registry, traces, config.z);
        report["rows"] = json::array();
        for (const auto& row : rows) {
            report["rows"].push_back({{"task", row.task},
                                      {"condition", row.condition},
                                      {"n", row.n},
                                      {"successes", row.successes},
                                      {"rate", row.rate},
                                      {"ci_low", row.ci_low},
                                      {"ci_high", row.ci_high}});
        }
        return report;
    }

    const TaskSpec& task = single_task(registry, traces, config.mode);
    report["task"] = task.id;

    if (config.mode == "coverage" || config.mode == "rubric") {
        if (config.mode == "coverage" && task.metric != Metric::Coverage) {
            throw config_error("coverage mode needs a concept-coverage task");
        }
        if (config.mode == "rubric" && task.metric != Metric::RubricTotal) {
            throw config_error("rubric mode needs a rubric-scored task");
        }
        report["rows"] = json::array();
        double base_sum = 0.0, selected_sum = 0.0;
        long scored = 0;
        for (std::size_t i = 0; i < traces.size(); ++i) {
            const Trace& trace = traces[i];
            if (trace.records.empty()) continue;
            auto base = record_score(task, trace, trace.records.front());
            auto refined = record_score(task, trace, selected_record(trace));
            json row;
            row["index"] = i;
            row["input"] = trace.input;
            if (base) row["base"] = *base;
            if (refined) row["selected"] = *refined;
            report["rows"].push_back(std::move(row));
            if (base && refined) {
                base_sum += *base;
                selected_sum += *refined;
                ++scored;
            }
        }
        report["n"] = scored;
        if (scored > 0) {
            double scale =
                task.metric == Metric::RubricTotal ? task.rubric->total_max() : 1.0;
            double base_rate = base_sum / scored / scale;
            double selected_rate = selected_sum / scored / scale;
            report["base_mean"] = base_sum / scored;
            report["selected_mean"] = selected_sum / scored;
            report["base_rate"] = base_rate;
            report["selected_rate"] = selected_rate;
            report["base_interval"] = interval_json(wilson_interval_mean(base_rate, scored, config.z));
            report["selected_interval"] =
                interval_json(wilson_interval_mean(selected_rate, scored, config.z));
        }
        return report;
    }

    if (config.mode == "deltas") {
        auto deltas = iteration_deltas(
            traces, [&](const Trace& trace, const IterationRecord& record) {
                return record_score(task, trace, record);
            });
        report["counts"] = deltas.counts;
        report["means"] = deltas.means;
        report["deltas"] = deltas.deltas;
        return report;
    }

    if (config.mode == "ab") {
        if (task.judge_kind == JudgeKind::None) {
            throw config_error("task '" + task.id + "' has no pairwise judge");
        }
        auto evaluator = evaluator_backend(config);
        std::optional<ResponseCache> cache;
        if (!config.cache_dir.empty()) cache.emplace(config.cache_dir, config.cache_read_only);
        std::vector<PreferenceResult> results;
        long unparseable = 0;
        for (const auto& trace : traces) {
            if (trace.records.empty()) continue;
            auto result = ab_preference(*evaluator, task, judge_context(task, trace, config),
                                        trace.records.front().candidate,
                                        selected_record(trace).candidate,
                                        cache ? &*cache : nullptr);
            if (result.unparseable) ++unparseable;
            results.push_back(result);
        }
        AbSummary summary = summarize_preferences(results);
        report["n"] = summary.n;
        report["base_wins"] = summary.a_wins;
        report["refined_wins"] = summary.b_wins;
        report["both"] = summary.both;
        report["neither"] = summary.neither;
        report["unparseable"] = unparseable;
        report["both_wins_counted"] = config.both_wins;
        report["rows"] = json::array();
        long bonus = config.both_wins ? summary.both : 0;
        struct Side {
            const char* condition;
            long wins;
        };
        for (Side side : {Side{"Base", summary.a_wins}, Side{"+SelfRefine", summary.b_wins}}) {
            long successes = side.wins + bonus;
            Interval interval =
                summary.n > 0 ? wilson_interval(successes, summary.n, config.z) : Interval{};
            report["rows"].push_back({{"task", task.id},
                                      {"condition", side.condition},
                                      {"n", summary.n},
                                      {"successes", successes},
                                      {"rate", summary.n ? static_cast<double>(successes) / summary.n
                                                         : 0.0},
                                      {"ci_low", interval.low},
                                      {"ci_high", interval.high}});
        }
        return report;
    }

    if (config.mode == "one_vs_k") {
        if (task.judge_kind == JudgeKind::None) {
            throw config_error("task '" + task.id + "' has no pairwise judge");
        }
        if (config.samples_path.empty()) {
            throw config_error("one_vs_k mode needs --samples");
        }
        std::map<std::string, std::vector<std::string>> samples_by_input;
        {
            std::ifstream in(config.samples_path, std::ios::binary);
            if (!in) throw io_error("cannot open samples file " + config.samples_path.string());
            std::string line;
            std::size_t line_no = 0;
            while (std::getline(in, line)) {
                ++line_no;
                if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
                json doc = json::parse(line, nullptr, false);
                if (doc.is_discarded() || !doc.is_object() || !doc.contains("input") ||
                    !doc.contains("samples") || !doc["samples"].is_array()) {
                    throw parse_error(config.samples_path.string() + " line " +
                                      std::to_string(line_no) +
                                      ": expected {\"input\", \"samples\": […]}");
                }
                samples_by_input[doc["input"].get<std::string>()] =
                    doc["samples"].get<std::vector<std::string>>();
            }
        }
        auto evaluator = evaluator_backend(config);
        std::optional<ResponseCache> cache;
        if (!config.cache_dir.empty()) cache.emplace(config.cache_dir, config.cache_read_only);
        long n = 0, preferred = 0;
        std::size_t k = 0;
        for (const auto& trace : traces) {
            if (trace.records.empty()) continue;
            auto it = samples_by_input.find(trace.input);
            if (it == samples_by_input.end()) {
                throw config_error("samples file has no entry for a trace input (task " +
                                   task.id + ")");
            }
            if (k == 0) k = it->second.size();
            if (it->second.size() != k) {
                throw config_error("sample lists must all share one k");
            }
            ++n;
            if (one_vs_k(*evaluator, task, judge_context(task, trace, config),
                         selected_record(trace).candidate, it->second,
                         cache ? &*cache : nullptr)) {
                ++preferred;
            }
        }
        report["n"] = n;
        report["k"] = k;
        report["preferred"] = preferred;
        report["rate"] = n ? static_cast<double>(preferred) / n : 0.0;
        if (n > 0) report.update(interval_json(wilson_interval(preferred, n, config.z)));
        return report;
    }

    throw config_error("unknown eval mode '" + config.mode + "'");
}

namespace {

std::string fmt4(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", value);
    return buf;
}

void row_table(std::ostringstream& out, const json& rows) {
    out << "task | condition | n | successes | rate | ci_low | ci_high\n";
    for (const auto& row : rows) {
        out << row["task"].get<std::string>() << " | " << row["condition"].get<std::string>()
            << " | " << row["n"].get<long>() << " | " << row["successes"].get<long>() << " | "
            << fmt4(row["rate"].get<double>()) << " | " << fmt4(row["ci_low"].get<double>())
            << " | " << fmt4(row["ci_high"].get<double>()) << "\n";
    }
}

} // namespace

std::string render_report_table(const json& report) {
    std::ostringstream out;
    std::string mode = report.value("mode", "");
    if (mode == "wilson") {
        out << "successes | n | rate | ci_low | ci_high | z\n";
        out << report["successes"].get<long>() << " | " << report["n"].get<long>() << " | "
            << fmt4(report["rate"].get<double>()) << " | " << fmt4(report["ci_low"].get<double>())
            << " | " << fmt4(report["ci_high"].get<double>()) << " | "
            << fmt4(report["z"].get<double>()) << "\n";
    } else if (mode == "report" || mode == "ab") {
        if (mode == "ab") {
            out << "n=" << report["n"].get<long>() << " base_wins="
                << report["base_wins"].get<long>() << " refined_wins="
                << report["refined_wins"].get<long>() << " both=" << report["both"].get<long>()
                << " neither=" << report["neither"].get<long>()
                << " unparseable=" << report["unparseable"].get<long>() << "\n";
        }
        row_table(out, report["rows"]);
    } else if (mode == "coverage" || mode == "rubric") {
        out << "index | base | selected\n";
        for (const auto& row : report["rows"]) {
            out << row["index"].get<long>() << " | "
                << (row.contains("base") ? fmt4(row["base"].get<double>()) : std::string("-"))
                << " | "
                << (row.contains("selected") ? fmt4(row["selected"].get<double>())
                                             : std::string("-"))
                << "\n";
        }
        if (report.contains("base_mean")) {
            out << "base mean " << fmt4(report["base_mean"].get<double>()) << " ["
                << fmt4(report["base_interval"]["ci_low"].get<double>()) << ", "
                << fmt4(report["base_interval"]["ci_high"].get<double>()) << "]\n";
            out << "selected mean " << fmt4(report["selected_mean"].get<double>()) << " ["
                << fmt4(report["selected_interval"]["ci_low"].get<double>()) << ", "
                << fmt4(report["selected_interval"]["ci_high"].get<double>()) << "]\n";
        }
    } else if (mode == "deltas") {
        out << "t | n | mean | delta\n";
        const auto& means = report["means"];
        const auto& counts = report["counts"];
        const auto& deltas = report["deltas"];
        for (std::size_t t = 0; t < means.size(); ++t) {
            out << t << " | " << counts[t].get<long>() << " | " << fmt4(means[t].get<double>())
                << " | " << (t > 0 ? fmt4(deltas[t - 1].get<double>()) : std::string("-")) << "\n";
        }
    } else if (mode == "one_vs_k") {
        out << "n | k | preferred | rate | ci_low | ci_high\n";
        out << report["n"].get<long>() << " | " << report["k"].get<long>() << " | "
            << report["preferred"].get<long>() << " | " << fmt4(report["rate"].get<double>())
            << " | " << (report.contains("ci_low") ? fmt4(report["ci_low"].get<double>())
                                                   : std::string("-"))
            << " | " << (report.contains("ci_high") ? fmt4(report["ci_high"].get<double>())
                                                    : std::string("-"))
            << "\n";
    } else {
        out << report.dump(2) << "\n";
    }
    return out.str();
}

} // namespace selfrefine
