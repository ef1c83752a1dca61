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

#include "dyst/scene.hpp"

#include "dyst/error.hpp"

#include <json.hpp>

#include <set>
#include <sstream>
#include <unordered_set>

namespace dyst {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string_view to_string(Motion motion) {
    return motion == Motion::static_ ? "static" : "dynamic";
}

std::size_t SceneSpec::find_entity(std::string_view id) const {
    for (std::size_t i = 0; i < entities.size(); ++i) {
        if (entities[i].id == id) {
            return i;
        }
    }
    return std::string::npos;
}

namespace {

json parse_strict(std::string_view text) {
    std::vector<std::set<std::string>> seen;
    json::parser_callback_t reject_duplicates = [&seen](int, json::parse_event_t event, json &parsed) {
        switch (event) {
        case json::parse_event_t::object_start:
            seen.emplace_back();
            break;
        case json::parse_event_t::object_end:
            seen.pop_back();
            break;
        case json::parse_event_t::key: {
            auto key = parsed.get<std::string>();
            if (!seen.back().insert(key).second) {
                throw SyntaxError("duplicate key \"" + key + "\"");
            }
            break;
        }
        default:
            break;
        }
        return true;
    };
    try {
        return json::parse(text.begin(), text.end(), reject_duplicates);
    } catch (const json::parse_error &e) {
        throw SyntaxError(e.what());
    }
}

void require_fields(const json &obj, const std::string &path, std::initializer_list<const char *> fields) {
    if (!obj.is_object()) {
        throw SchemaError("expected an object", path.empty() ? "$" : path);
    }
    for (const char *f : fields) {
        if (!obj.contains(f)) {
            throw SchemaError(std::string("missing field \"") + f + "\"", path.empty() ? "$" : path);
        }
    }
    for (const auto &item : obj.items()) {
        bool known = false;
        for (const char *f : fields) {
            known = known || item.key() == f;
        }
        if (!known) {
            throw SchemaError("unknown field \"" + item.key() + "\"", path.empty() ? "$" : path);
        }
    }
}

std::string join(const std::string &path, const std::string &field) {
    return path.empty() ? field : path + "." + field;
}

std::string get_string(const json &obj, const std::string &field, const std::string &path) {
    const auto &v = obj.at(field);
    if (!v.is_string()) {
        throw SchemaError("expected a string", join(path, field));
    }
    return v.get<std::string>();
}

// Accepts only JSON integers; 3.0 is rejected.
std::int64_t get_integer(const json &v, const std::string &path) {
    if (!v.is_number_integer()) {
        throw SchemaError("expected an integer", path);
    }
    return v.get<std::int64_t>();
}

double get_real(const json &v, const std::string &path) {
    if (!v.is_number()) {
        throw SchemaError("expected a number", path);
    }
    return v.get<double>();
}

std::size_t get_positive(const json &obj, const std::string &field, const std::string &path) {
    auto p = join(path, field);
    auto value = get_integer(obj.at(field), p);
    if (value < 1) {
        throw InvariantError("must be >= 1 (got " + std::to_string(value) + ")", p);
    }
    return static_cast<std::size_t>(value);
}

SceneSpec from_json(const json &doc) {
    require_fields(doc, "", {"version", "global_prompt", "geometry", "entities"});
    if (get_string(doc, "version", "") != kSceneFormatVersion) {
        throw SchemaError("unsupported version \"" + doc.at("version").get<std::string>() + "\"", "version");
    }

    SceneSpec spec;
    spec.global_prompt = get_string(doc, "global_prompt", "");

    const auto &geo = doc.at("geometry");
    require_fields(geo, "geometry", {"frames", "height", "width", "channels"});
    spec.geometry.frames = get_positive(geo, "frames", "geometry");
    spec.geometry.height = get_positive(geo, "height", "geometry");
    spec.geometry.width = get_positive(geo, "width", "geometry");
    spec.geometry.channels = get_positive(geo, "channels", "geometry");

    const auto &entities = doc.at("entities");
    if (!entities.is_array()) {
        throw SchemaError("expected an array", "entities");
    }
    for (std::size_t i = 0; i < entities.size(); ++i) {
        std::string path = "entities[" + std::to_string(i) + "]";
        const auto &e = entities[i];
        require_fields(e, path, {"id", "descriptor", "motion", "keyframes"});
        EntitySpec entity;
        entity.id = get_string(e, "id", path);
        entity.descriptor = get_string(e, "descriptor", path);
        auto motion = get_string(e, "motion", path);
        if (motion == "static") {
            entity.motion = Motion::static_;
        } else if (motion == "dynamic") {
            entity.motion = Motion::dynamic;
        } else {
            throw SchemaError("motion must be \"static\" or \"dynamic\"", path + ".motion");
        }
        const auto &kfs = e.at("keyframes");
        if (!kfs.is_array()) {
            throw SchemaError("expected an array", path + ".keyframes");
        }
        for (std::size_t k = 0; k < kfs.size(); ++k) {
            std::string kpath = path + ".keyframes[" + std::to_string(k) + "]";
            const auto &kf = kfs[k];
            require_fields(kf, kpath, {"frame", "box"});
            auto frame = get_integer(kf.at("frame"), kpath + ".frame");
            if (frame < 0) {
                throw InvariantError("frame index must be >= 0", kpath + ".frame");
            }
            const auto &box = kf.at("box");
            if (!box.is_array() || box.size() != 4) {
                throw SchemaError("expected [x0, y0, x1, y1]", kpath + ".box");
            }
            Keyframe keyframe;
            keyframe.frame = static_cast<std::size_t>(frame);
            keyframe.box = {get_real(box[0], kpath + ".box[0]"), get_real(box[1], kpath + ".box[1]"),
                            get_real(box[2], kpath + ".box[2]"), get_real(box[3], kpath + ".box[3]")};
            entity.keyframes.push_back(keyframe);
        }
        spec.entities.push_back(std::move(entity));
    }
    return spec;
}

void check_box(const NormalizedBox &b, const std::string &path, std::vector<Diagnostic> &out) {
    auto fail = [&](const std::string &msg) { out.push_back({Severity::error, path, msg}); };
    std::ostringstream v;
    v.precision(17);
    if (!(b.x0 < b.x1)) {
        v << "x0 < x1 required (x0=" << b.x0 << ", x1=" << b.x1 << ")";
        fail(v.str());
        return;
    }
    if (!(b.y0 < b.y1)) {
        v << "y0 < y1 required (y0=" << b.y0 << ", y1=" << b.y1 << ")";
        fail(v.str());
        return;
    }
    if (!(0.0 <= b.x0 && b.x1 <= 1.0 && 0.0 <= b.y0 && b.y1 <= 1.0)) {
        fail("coordinates must lie in [0, 1]");
    }
}

} // namespace

std::vector<Diagnostic> validate_scene(const SceneSpec &spec) {
    std::vector<Diagnostic> out;
    auto error = [&out](std::string path, std::string msg) {
        out.push_back({Severity::error, std::move(path), std::move(msg)});
    };

    const auto &g = spec.geometry;
    if (g.frames < 1) error("geometry.frames", "must be >= 1");
    if (g.height < 1) error("geometry.height", "must be >= 1");
    if (g.width < 1) error("geometry.width", "must be >= 1");
    if (g.channels < 1) error("geometry.channels", "must be >= 1");

    if (spec.entities.empty()) {
        error("entities", "at least one entity is required");
    }

    std::unordered_set<std::string> ids;
    for (std::size_t i = 0; i < spec.entities.size(); ++i) {
        const auto &e = spec.entities[i];
        std::string path = "entities[" + std::to_string(i) + "]";
        if (e.id.empty()) {
            error(path + ".id", "id must be non-empty");
        } else if (!ids.insert(e.id).second) {
            error(path + ".id", "duplicate entity id \"" + e.id + "\"");
        }
        if (e.descriptor.find_first_not_of(" \t\r\n") == std::string::npos) {
            error(path + ".descriptor", "descriptor must be non-empty");
        }

        const std::string kpath = path + ".keyframes";
        if (e.motion == Motion::static_ && e.keyframes.size() != 1) {
            error(kpath, "static entities carry exactly one keyframe (got " + std::to_string(e.keyframes.size()) + ")");
        }
        if (e.motion == Motion::dynamic) {
            if (e.keyframes.size() < 2) {
                error(kpath, "dynamic entities carry at least two keyframes (got " + std::to_string(e.keyframes.size()) + ")");
            } else {
                if (e.keyframes.front().frame != 0) {
                    error(kpath + "[0].frame", "first keyframe of a dynamic entity must be at frame 0");
                }
                if (g.frames >= 1 && e.keyframes.back().frame != g.frames - 1) {
                    error(kpath + "[" + std::to_string(e.keyframes.size() - 1) + "].frame",
                          "last keyframe of a dynamic entity must be at frame " + std::to_string(g.frames - 1));
                }
                for (std::size_t k = 1; k < e.keyframes.size(); ++k) {
                    if (e.keyframes[k].frame <= e.keyframes[k - 1].frame) {
                        error(kpath + "[" + std::to_string(k) + "].frame", "keyframe indices must be strictly increasing");
                    }
                }
            }
        }
        for (std::size_t k = 0; k < e.keyframes.size(); ++k) {
            std::string p = kpath + "[" + std::to_string(k) + "]";
            if (e.keyframes[k].frame >= g.frames) {
                error(p + ".frame", "frame index " + std::to_string(e.keyframes[k].frame) + " outside [0, " +
                                        std::to_string(g.frames == 0 ? 0 : g.frames - 1) + "]");
            }
            check_box(e.keyframes[k].box, p + ".box", out);
        }
    }
    return out;
}

SceneSpec parse_scene_spec(std::string_view text) {
    auto spec = from_json(parse_strict(text));
    auto diagnostics = validate_scene(spec);
    for (const auto &d : diagnostics) {
        if (d.severity == Severity::error) {
            throw InvariantError(d.message, d.path);
        }
    }
    return spec;
}

std::string serialize_scene(const SceneSpec &spec) {
    ordered_json doc;
    doc["version"] = kSceneFormatVersion;
    doc["global_prompt"] = spec.global_prompt;
    doc["geometry"] = ordered_json{{"frames", spec.geometry.frames},
                                   {"height", spec.geometry.height},
                                   {"width", spec.geometry.width},
                                   {"channels", spec.geometry.channels}};
    auto entities = ordered_json::array();
    for (const auto &e : spec.entities) {
        ordered_json entity;
        entity["id"] = e.id;
        entity["descriptor"] = e.descriptor;
        entity["motion"] = to_string(e.motion);
        auto kfs = ordered_json::array();
        for (const auto &kf : e.keyframes) {
            kfs.push_back(ordered_json{{"frame", kf.frame},
                                       {"box", {kf.box.x0, kf.box.y0, kf.box.x1, kf.box.y1}}});
        }
        entity["keyframes"] = std::move(kfs);
        entities.push_back(std::move(entity));
    }
    doc["entities"] = std::move(entities);
    return doc.dump(2) + "\n";
}

std::string format_diagnostics(const std::vector<Diagnostic> &diagnostics) {
    std::string out;
    for (const auto &d : diagnostics) {
        out += (d.severity == Severity::error ? "error: " : "warning: ") + d.path + ": " + d.message + "\n";
    }
    return out;
}

} // namespace dyst
