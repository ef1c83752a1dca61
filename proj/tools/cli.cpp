// Copyright 2026 The dyst Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.hpp"

#include "dyst/error.hpp"
#include "dyst/harness.hpp"
#include "dyst/layout.hpp"
#include "dyst/mask.hpp"
#include "dyst/planner.hpp"
#include "dyst/propagation.hpp"
#include "dyst/rules.hpp"
#include "dyst/scene.hpp"
#include "dyst/svg.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

namespace dyst::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string sha256_hex(const std::string &bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
    std::ostringstream hex;
    for (unsigned int k = 0; k < len; ++k) {
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[k]);
    }
    return hex.str();
}

namespace {

constexpr std::size_t kOracleLimit = 2048;
constexpr std::size_t kProbeLimit = 4096;

/// Error carrying its exit code through the command handlers.
struct CommandError {
    int code;
    std::string kind;
    std::string message;
    std::string path;
};

std::string read_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CommandError{kUsage, "IOError", "cannot read " + path.string(), path.string()};
    }
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const fs::path &path, const std::string &bytes) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw CommandError{kUsage, "IOError", "cannot write " + path.string(), path.string()};
    }
}

bool on_off(const std::string &value) { return value == "on"; }
const char *on_off(bool value) { return value ? "on" : "off"; }

struct Settings {
    MergeScope scope = MergeScope::per_frame;
    MaskPolicy policy;
    BlendSchedule schedule;
    std::uint64_t seed = 0;
};

ordered_json settings_json(const Settings &s) {
    return ordered_json{{"merge_scope", to_string(s.scope)},
                        {"global_context", on_off(s.policy.global_context)},
                        {"entity_reads_global", on_off(s.policy.entity_reads_global)},
                        {"background_context", on_off(s.policy.background_context)},
                        {"alpha", s.schedule.alpha},
                        {"active_fraction", s.schedule.active_fraction},
                        {"decay", to_string(s.schedule.decay)},
                        {"seed", s.seed}};
}

Settings settings_from_json(const json &j) {
    Settings s;
    auto scope = parse_merge_scope(j.at("merge_scope").get<std::string>());
    auto decay = parse_decay(j.at("decay").get<std::string>());
    if (!scope || !decay) {
        throw CommandError{kUsage, "SchemaError", "manifest flags are malformed", "flags"};
    }
    s.scope = *scope;
    s.policy.global_context = on_off(j.at("global_context").get<std::string>());
    s.policy.entity_reads_global = on_off(j.at("entity_reads_global").get<std::string>());
    s.policy.background_context = on_off(j.at("background_context").get<std::string>());
    s.schedule = {j.at("alpha").get<double>(), j.at("active_fraction").get<double>(), *decay};
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

struct Artifacts {
    SceneSpec spec;
    LayoutTimeline timeline;
    TokenLayout layout;
    TokenClassTable table;
    AttentionMask mask;
    PropagationPlan plan;
};

Artifacts build_artifacts(SceneSpec spec, const Settings &settings, const MaskPolicy &policy) {
    Artifacts a;
    a.spec = std::move(spec);
    a.timeline = build_timeline(a.spec, settings.scope);
    a.layout = make_token_layout(a.spec);
    a.table = assign_classes(a.spec, a.timeline, a.layout);
    a.mask = compile_mask(a.table, a.layout, a.timeline, policy);
    a.plan = build_plan(a.timeline, a.layout, settings.schedule);
    return a;
}

Artifacts build_artifacts(SceneSpec spec, const Settings &settings) {
    return build_artifacts(std::move(spec), settings, settings.policy);
}

ordered_json layout_json(const TokenLayout &layout) {
    ordered_json spans = ordered_json::object();
    for (std::size_t k = 0; k < layout.entity_ids.size(); ++k) {
        spans[layout.entity_ids[k]] = {layout.entity_spans[k].begin, layout.entity_spans[k].end};
    }
    return ordered_json{{"text_len", layout.text_len},
                        {"sequence_length", layout.sequence_length()},
                        {"global_span", {layout.global_span.begin, layout.global_span.end}},
                        {"entity_spans", std::move(spans)}};
}

ordered_json meta_json(const MaskMeta &meta) {
    return ordered_json{{"t2t", meta.t2t},
                        {"t2v", meta.t2v},
                        {"v2t", meta.v2t},
                        {"v2v", meta.v2v},
                        {"cross_entity_v2v_per_frame", meta.cross_entity_v2v}};
}

SceneSpec load_scene(const fs::path &path) {
    return parse_scene_spec(read_file(path));
}

// ---------------------------------------------------------------------------
// plan

struct PlanOptions {
    std::string prompt;
    std::string replay;
    std::string out = "scene.json";
    std::string transcript_out;
    PlannerConfig config;
    LatentGeometry geometry{49, 30, 45, 16};
};

int cmd_plan(const PlanOptions &o, std::ostream &out) {
    auto instruction = build_planner_prompt(o.prompt, o.geometry);
    o.config.validate();

    std::unique_ptr<PlanTransport> transport;
    if (!o.replay.empty()) {
        transport = std::make_unique<ReplayTransport>(transcript_from_json(read_file(o.replay)));
    } else {
        transport = std::make_unique<HttpTransport>(o.config);
    }

    std::string transcript_path = o.transcript_out.empty() ? o.out + ".transcript.json" : o.transcript_out;
    auto [raw, transcript] = request_plan(*transport, instruction);
    try {
        auto spec = coerce_plan(raw, o.config, transcript, *transport, o.geometry);
        write_file(o.out, serialize_scene(spec));
        write_file(transcript_path, transcript_to_json(transcript.turns()));
        out << "wrote " << o.out << " (" << spec.entities.size() << " entities, " << transcript.repair_attempts
            << " repair attempt(s))\n";
        out << "wrote " << transcript_path << "\n";
        return kOk;
    } catch (const UnrecoverablePlan &e) {
        write_file(transcript_path, transcript_to_json(e.transcript().turns()));
        throw;
    }
}

// ---------------------------------------------------------------------------
// compile

struct CompileOptions {
    std::string scene;
    std::string out_dir = "out";
    std::string merge_scope = "per_frame";
    std::string global_context = "on";
    std::string entity_reads_global = "on";
    std::string background_context = "on";
    double alpha = 0.3;
    double active_fraction = 0.4;
    std::string decay = "linear";
    std::uint64_t seed = 0;
};

Settings settings_from_options(const CompileOptions &o) {
    Settings s;
    auto scope = parse_merge_scope(o.merge_scope);
    auto decay = parse_decay(o.decay);
    if (!scope) throw CommandError{kUsage, "UsageError", "--merge-scope must be per_frame or global", ""};
    if (!decay) throw CommandError{kUsage, "UsageError", "--decay must be constant or linear", ""};
    s.scope = *scope;
    s.policy = {on_off(o.global_context), on_off(o.entity_reads_global), on_off(o.background_context)};
    s.schedule = {o.alpha, o.active_fraction, *decay};
    if (!s.schedule.valid()) {
        throw CommandError{kUsage, "UsageError", "--alpha must lie in [0, 1] and --active-fraction in (0, 1]", ""};
    }
    s.seed = o.seed;
    return s;
}

int cmd_compile(const CompileOptions &o, std::ostream &out) {
    auto settings = settings_from_options(o);
    auto scene_text = read_file(o.scene);
    auto artifacts = build_artifacts(parse_scene_spec(scene_text), settings);

    fs::path dir(o.out_dir);
    fs::create_directories(dir);
    std::vector<std::pair<std::string, std::string>> files{
        {"timeline.json", timeline_to_json(artifacts.timeline)},
        {"mask.dystmsk", [&] {
             auto bytes = serialize_mask(artifacts.mask);
             return std::string(bytes.begin(), bytes.end());
         }()},
        {"plan.json", plan_to_json(artifacts.plan)},
    };

    ordered_json manifest;
    manifest["tool"] = "dyst";
    manifest["tool_version"] = kToolVersion;
    manifest["inputs"] = {{"scene", ordered_json{{"path", o.scene}, {"sha256", sha256_hex(scene_text)}}}};
    manifest["flags"] = settings_json(settings);
    manifest["token_layout"] = layout_json(artifacts.layout);
    manifest["mask_meta"] = meta_json(artifacts.mask.meta);
    auto outputs = ordered_json::array();
    for (const auto &[name, bytes] : files) {
        write_file(dir / name, bytes);
        outputs.push_back(ordered_json{{"path", name}, {"sha256", sha256_hex(bytes)}});
    }
    manifest["outputs"] = std::move(outputs);
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");

    out << "compiled " << o.scene << ": N=" << artifacts.mask.size() << " (L=" << artifacts.layout.text_len
        << "), " << artifacts.mask.pattern_count() << " row patterns, " << artifacts.plan.entries.size()
        << " propagation entries\n";
    for (const auto &[name, bytes] : files) {
        out << "wrote " << (dir / name).string() << "\n";
    }
    out << "wrote " << (dir / "manifest.json").string() << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// verify

struct Check {
    std::string name;
    enum { pass, fail, skip } status = pass;
    std::string detail;
};

fs::path resolve_input(const std::string &recorded, const fs::path &manifest_dir) {
    fs::path p(recorded);
    if (p.is_absolute() || fs::exists(p)) {
        return p;
    }
    return manifest_dir / p;
}

// Entity pairs that never share an interaction class.
std::vector<std::pair<std::size_t, std::size_t>> separated_pairs(const LayoutTimeline &t) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t a = 0; a < t.entity_ids.size(); ++a) {
        for (std::size_t b = 0; b < t.entity_ids.size(); ++b) {
            if (a == b) continue;
            bool ever = std::any_of(t.frames.begin(), t.frames.end(),
                                    [&](const FrameLayout &f) { return f.class_of_entity[a] == f.class_of_entity[b]; });
            if (!ever) out.emplace_back(a, b);
        }
    }
    return out;
}

void leakage_checks(const Artifacts &a, const Settings &settings, std::vector<Check> &checks) {
    auto pairs = separated_pairs(a.timeline);
    if (a.mask.size() > kProbeLimit) {
        checks.push_back({"leakage-isolated", Check::skip, "N > " + std::to_string(kProbeLimit)});
        checks.push_back({"leakage-paths", Check::skip, "N > " + std::to_string(kProbeLimit)});
        return;
    }
    if (pairs.empty()) {
        checks.push_back({"leakage-isolated", Check::skip, "no entity pair is separated in every frame"});
        checks.push_back({"leakage-paths", Check::skip, "no entity pair is separated in every frame"});
        return;
    }

    auto isolated = build_artifacts(a.spec, settings, MaskPolicy::isolated());
    Check zero{"leakage-isolated", Check::pass, std::to_string(pairs.size()) + " ordered pairs, deviation 0.0"};
    Check paths{"leakage-paths", Check::pass, "deviation only along mask paths (k = 1, 2)"};
    for (auto [pa, pb] : pairs) {
        const auto &perturbed = a.timeline.entity_ids[pa];
        const auto &probe = a.timeline.entity_ids[pb];
        double d = leakage_probe(a.spec, isolated.timeline, isolated.layout, isolated.mask, perturbed, probe, 1.0,
                                 settings.seed);
        if (d != 0.0) {
            zero.status = Check::fail;
            std::ostringstream s;
            s << perturbed << " -> " << probe << " deviation " << d;
            zero.detail = s.str();
        }

        auto span = a.layout.entity_spans[static_cast<std::size_t>(
            std::find(a.layout.entity_ids.begin(), a.layout.entity_ids.end(), perturbed) - a.layout.entity_ids.begin())];
        auto rows = entity_video_rows(a.timeline, a.layout, pb);
        for (std::size_t k = 1; k <= 2; ++k) {
            double dk = leakage_probe(a.spec, a.timeline, a.layout, a.mask, perturbed, probe, 1.0, settings.seed, k);
            if (dk == 0.0) continue;
            bool reachable = false;
            for (auto r : rows) {
                auto seen = reachable_within(a.mask, r, k);
                for (auto i = span.begin; i < span.end && !reachable; ++i) reachable = seen[i] != 0;
                if (reachable) break;
            }
            if (!reachable) {
                paths.status = Check::fail;
                paths.detail = perturbed + " -> " + probe + " deviates at k=" + std::to_string(k) + " without a path";
            }
        }
    }
    checks.push_back(zero);
    checks.push_back(paths);
}

void propagation_checks(const PropagationPlan &plan, std::uint64_t seed, std::vector<Check> &checks) {
    const auto &g = plan.geometry;
    const std::size_t hw = g.cells_per_frame();
    Matrix latent = seeded_state(g.video_tokens(), g.channels, seed);

    std::map<std::size_t, std::size_t> hits;
    for (const auto &e : plan.entries) ++hits[e.target];

    {
        auto full = plan;
        full.schedule = {1.0, 1.0, Decay::constant};
        for (auto &e : full.entries) e.weight = 1.0;
        auto result = apply_plan(latent, full, 0, 1);
        bool ok = true;
        for (const auto &e : full.entries) {
            if (hits[e.target] != 1) continue;
            for (std::size_t d = 0; d < g.channels; ++d) ok = ok && result(e.target, d) == latent(e.source, d);
        }
        checks.push_back({"propagation-overwrite", ok ? Check::pass : Check::fail, "alpha = 1 copies sources exactly"});
    }
    {
        auto none = plan;
        none.schedule.alpha = 0.0;
        for (auto &e : none.entries) e.weight = 0.0;
        bool ok = apply_plan(latent, none, 0, 1) == latent;
        checks.push_back({"propagation-identity", ok ? Check::pass : Check::fail, "alpha = 0 leaves the latent unchanged"});
    }
    {
        auto shuffled = plan;
        std::mt19937_64 rng(seed);
        std::shuffle(shuffled.entries.begin(), shuffled.entries.end(), rng);
        auto a = apply_plan(latent, plan, 0, 10);
        auto b = apply_plan(latent, shuffled, 0, 10);
        checks.push_back({"propagation-order", a == b ? Check::pass : Check::fail, "entry permutation is bitwise neutral"});

        bool ok = std::equal(a.data.begin(), a.data.begin() + static_cast<std::ptrdiff_t>(hw * g.channels),
                             latent.data.begin());
        checks.push_back({"propagation-frame0", ok ? Check::pass : Check::fail, "frame-0 rows never written"});
    }
}

int cmd_verify(const std::string &manifest_path, std::ostream &out) {
    fs::path mpath(manifest_path);
    if (fs::is_directory(mpath)) {
        mpath /= "manifest.json";
    }
    json manifest;
    try {
        manifest = json::parse(read_file(mpath));
    } catch (const json::parse_error &e) {
        throw CommandError{kUsage, "SyntaxError", e.what(), mpath.string()};
    }
    const fs::path dir = mpath.parent_path();
    std::vector<Check> checks;

    Settings settings;
    std::string scene_text;
    try {
        settings = settings_from_json(manifest.at("flags"));
        for (const auto &o : manifest.at("outputs")) {
            auto name = o.at("path").get<std::string>();
            auto bytes = read_file(dir / name);
            bool ok = sha256_hex(bytes) == o.at("sha256").get<std::string>();
            checks.push_back({"hash:" + name, ok ? Check::pass : Check::fail, ok ? "sha256 matches" : "sha256 differs"});
        }
        auto scene_path = resolve_input(manifest.at("inputs").at("scene").at("path").get<std::string>(), dir);
        scene_text = read_file(scene_path);
        bool ok = sha256_hex(scene_text) == manifest.at("inputs").at("scene").at("sha256").get<std::string>();
        checks.push_back({"hash:scene", ok ? Check::pass : Check::fail, scene_path.string()});
    } catch (const json::exception &e) {
        throw CommandError{kUsage, "SchemaError", e.what(), mpath.string()};
    }

    auto mask_bytes = read_file(dir / "mask.dystmsk");
    std::optional<AttentionMask> loaded;
    try {
        loaded = deserialize_mask(std::span(reinterpret_cast<const std::uint8_t *>(mask_bytes.data()), mask_bytes.size()));
        checks.push_back({"mask-format", Check::pass, "DYSTMSK1, CRC32 ok"});
    } catch (const FormatError &e) {
        checks.push_back({"mask-format", Check::fail, e.what()});
    }

    auto artifacts = build_artifacts(parse_scene_spec(scene_text), settings);
    {
        auto rebuilt = serialize_mask(artifacts.mask);
        bool ok = std::string(rebuilt.begin(), rebuilt.end()) == mask_bytes;
        checks.push_back({"recompile-mask", ok ? Check::pass : Check::fail,
                          ok ? "matches manifest flags" : "mask differs from a recompile with the manifest flags"});
        bool timeline_ok = timeline_to_json(artifacts.timeline) == read_file(dir / "timeline.json");
        checks.push_back({"recompile-timeline", timeline_ok ? Check::pass : Check::fail, ""});
        bool plan_ok = plan_to_json(artifacts.plan) == read_file(dir / "plan.json");
        checks.push_back({"recompile-plan", plan_ok ? Check::pass : Check::fail, ""});
    }

    const AttentionMask &mask = loaded ? *loaded : artifacts.mask;
    if (mask.size() <= kOracleLimit) {
        RuleEvaluator rules(artifacts.timeline, artifacts.layout, settings.policy);
        auto mismatch = first_rule_mismatch(mask, rules);
        checks.push_back({"oracle-equivalence", mismatch ? Check::fail : Check::pass,
                          mismatch ? "first mismatch at (" + std::to_string(mismatch->first) + ", " +
                                         std::to_string(mismatch->second) + ")"
                                   : "all " + std::to_string(mask.size() * mask.size()) + " pairs agree"});
    } else {
        checks.push_back({"oracle-equivalence", Check::skip, "N > " + std::to_string(kOracleLimit)});
    }

    leakage_checks(artifacts, settings, checks);

    try {
        propagation_checks(plan_from_json(read_file(dir / "plan.json")), settings.seed, checks);
    } catch (const Error &e) {
        checks.push_back({"propagation", Check::fail, e.what()});
    }

    bool all = true;
    out << std::left << std::setw(24) << "check" << std::setw(6) << "status"
        << "detail\n";
    for (const auto &c : checks) {
        const char *status = c.status == Check::pass ? "PASS" : c.status == Check::fail ? "FAIL" : "SKIP";
        all = all && c.status != Check::fail;
        out << std::left << std::setw(24) << c.name << std::setw(6) << status << c.detail << "\n";
    }
    out << (all ? "verify: all checks passed\n" : "verify: FAILED\n");
    return all ? kOk : kVerification;
}

// ---------------------------------------------------------------------------
// preview / heatmap

int cmd_preview(const std::string &timeline_path, const std::string &out_path, bool animate, std::ostream &out) {
    auto timeline = timeline_from_json(read_file(timeline_path));
    if (animate) {
        write_file(out_path, render_animated(timeline));
        out << "wrote " << out_path << "\n";
        return kOk;
    }
    fs::path dir(out_path);
    fs::create_directories(dir);
    auto frames = render_frames(timeline);
    for (std::size_t f = 0; f < frames.size(); ++f) {
        std::ostringstream name;
        name << "frame_" << std::setw(3) << std::setfill('0') << f << ".svg";
        write_file(dir / name.str(), frames[f]);
    }
    out << "wrote " << frames.size() << " frame(s) to " << dir.string() << "\n";
    return kOk;
}

int cmd_heatmap(const std::string &manifest_path, const std::string &entity, std::size_t frame,
                const std::string &out_path, std::ostream &out) {
    fs::path mpath(manifest_path);
    if (fs::is_directory(mpath)) {
        mpath /= "manifest.json";
    }
    auto manifest = json::parse(read_file(mpath));
    auto settings = settings_from_json(manifest.at("flags"));
    auto scene = resolve_input(manifest.at("inputs").at("scene").at("path").get<std::string>(), mpath.parent_path());
    auto a = build_artifacts(load_scene(scene), settings);

    TextSpan span = a.layout.global_span;
    if (!entity.empty()) {
        auto it = std::find(a.layout.entity_ids.begin(), a.layout.entity_ids.end(), entity);
        if (it == a.layout.entity_ids.end()) {
            throw UnknownEntity("unknown entity \"" + entity + "\"");
        }
        span = a.layout.entity_spans[static_cast<std::size_t>(it - a.layout.entity_ids.begin())];
    }
    auto state = seeded_state(a.mask.size(), a.spec.geometry.channels, settings.seed);
    auto heat = attention_heatmap(state, a.mask, a.layout, span, frame, settings.seed + 1);
    write_file(out_path, render_heatmap(heat, (entity.empty() ? std::string("global") : entity) + " / frame " +
                                                  std::to_string(frame)));
    out << "wrote " << out_path << "\n";
    return kOk;
}

int exit_code_for(const Error &e) {
    const auto &k = e.kind();
    if (k == "UnrecoverablePlan") return kPlanner;
    if (k == "NetworkError" || k == "TimeoutError" || k == "ServiceError") return kNetwork;
    return kUsage;
}

void report(std::ostream &err, bool json_errors, const CommandError &e) {
    if (json_errors) {
        ordered_json j{{"error", e.kind}, {"message", e.message}, {"path", e.path}, {"exit_code", e.code}};
        err << j.dump() << "\n";
    } else {
        err << "error: " << e.message << "\n";
    }
}

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    CLI::App app{"Compile layout, attention-mask and propagation artifacts for compositional text-to-video control", "dyst"};
    app.require_subcommand(1);
    app.fallthrough();
    bool json_errors = false;
    app.add_flag("--json-errors", json_errors, "Print errors as one JSON object on stderr");

    PlanOptions plan;
    auto *plan_cmd = app.add_subcommand("plan", "Ask an LLM planner for a scene document");
    plan_cmd->add_option("prompt", plan.prompt, "User prompt")->required();
    plan_cmd->add_option("--replay", plan.replay, "Replay a recorded transcript instead of calling the service");
    plan_cmd->add_option("--out,-o", plan.out, "Scene document to write");
    plan_cmd->add_option("--transcript", plan.transcript_out, "Transcript to write (default <out>.transcript.json)");
    plan_cmd->add_option("--endpoint", plan.config.endpoint, "OpenAI-compatible base URL");
    plan_cmd->add_option("--model", plan.config.model_name, "Model name");
    plan_cmd->add_option("--max-retries", plan.config.max_retries, "Repair attempts (0-5)");
    plan_cmd->add_option("--timeout", plan.config.timeout_seconds, "Request timeout in seconds");
    plan_cmd->add_option("--temperature", plan.config.temperature, "Sampling temperature");
    plan_cmd->add_option("--frames", plan.geometry.frames, "Latent frames");
    plan_cmd->add_option("--height", plan.geometry.height, "Latent rows");
    plan_cmd->add_option("--width", plan.geometry.width, "Latent columns");
    plan_cmd->add_option("--channels", plan.geometry.channels, "Latent channels");

    CompileOptions compile;
    auto *compile_cmd = app.add_subcommand("compile", "Compile timeline, mask, propagation plan and manifest");
    compile_cmd->add_option("--scene", compile.scene, "Scene document")->required();
    compile_cmd->add_option("--out-dir", compile.out_dir, "Output directory");
    compile_cmd->add_option("--merge-scope", compile.merge_scope, "per_frame|global")
        ->check(CLI::IsMember({"per_frame", "global"}));
    compile_cmd->add_option("--global-context", compile.global_context, "on|off")->check(CLI::IsMember({"on", "off"}));
    compile_cmd->add_option("--entity-reads-global", compile.entity_reads_global, "on|off")
        ->check(CLI::IsMember({"on", "off"}));
    compile_cmd->add_option("--background-context", compile.background_context, "on|off")
        ->check(CLI::IsMember({"on", "off"}));
    compile_cmd->add_option("--alpha", compile.alpha, "Propagation blend strength in [0, 1]");
    compile_cmd->add_option("--active-fraction", compile.active_fraction, "Fraction of steps with propagation");
    compile_cmd->add_option("--decay", compile.decay, "constant|linear")
        ->check(CLI::IsMember({"constant", "linear", "linear_to_zero"}));
    compile_cmd->add_option("--seed", compile.seed, "Seed recorded for verification probes");

    std::string verify_manifest;
    auto *verify_cmd = app.add_subcommand("verify", "Re-check compiled artifacts");
    verify_cmd->add_option("manifest", verify_manifest, "manifest.json or its directory")->required();

    std::string timeline_path, preview_out;
    bool animate = false;
    auto *preview_cmd = app.add_subcommand("preview", "Render the layout timeline as SVG");
    preview_cmd->add_option("--timeline", timeline_path, "timeline.json")->required();
    preview_cmd->add_option("--out", preview_out, "Output directory, or file with --animate")->required();
    preview_cmd->add_flag("--animate", animate, "Write a single animated SVG");

    std::string heat_manifest, heat_entity, heat_out;
    std::size_t heat_frame = 0;
    auto *heat_cmd = app.add_subcommand("heatmap", "Render harness attention from a text span onto one frame");
    heat_cmd->add_option("manifest", heat_manifest, "manifest.json or its directory")->required();
    heat_cmd->add_option("--entity", heat_entity, "Entity whose text span is used (default: global prompt)");
    heat_cmd->add_option("--frame", heat_frame, "Frame index");
    heat_cmd->add_option("--out", heat_out, "SVG file")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp &) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp &) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError &e) {
        report(err, json_errors, {kUsage, "UsageError", e.what(), ""});
        if (!json_errors) err << app.help();
        return kUsage;
    }

    try {
        try {
            if (plan_cmd->parsed()) {
                if (plan.prompt.find_first_not_of(" \t\r\n") == std::string::npos) {
                    throw CommandError{kUsage, "UsageError", "plan needs a non-empty prompt", ""};
                }
                return cmd_plan(plan, out);
            }
            if (compile_cmd->parsed()) return cmd_compile(compile, out);
            if (verify_cmd->parsed()) return cmd_verify(verify_manifest, out);
            if (preview_cmd->parsed()) return cmd_preview(timeline_path, preview_out, animate, out);
            if (heat_cmd->parsed()) return cmd_heatmap(heat_manifest, heat_entity, heat_frame, heat_out, out);
        } catch (const Error &e) {
            throw CommandError{exit_code_for(e), e.kind(), e.what(), e.path()};
        } catch (const json::exception &e) {
            throw CommandError{kUsage, "SchemaError", e.what(), ""};
        } catch (const fs::filesystem_error &e) {
            throw CommandError{kUsage, "IOError", e.what(), e.path1().string()};
        }
    } catch (const CommandError &e) {
        report(err, json_errors, e);
        return e.code;
    }
    return kUsage;
}

} // namespace dyst::cli
