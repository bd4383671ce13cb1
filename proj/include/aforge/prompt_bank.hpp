#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "aforge/encoders.hpp"
#include "aforge/errors.hpp"
#include "aforge/io.hpp"
#include "aforge/tensor.hpp"

namespace aforge {

/// Per-class text prompts: the two-class template ensemble plus
/// keyword-specific abnormal prompts.
struct ClassPrompts {
    std::string class_name;
    std::vector<std::string> normal_templates;
    std::vector<std::string> abnormal_templates;
    std::vector<std::string> keywords;                    // file order
    std::map<std::string, std::string> keyword_prompts;   // keyword -> prompt

    void validate() const {
        if (normal_templates.empty()) {
            throw SchemaError("class '" + class_name + "': needs at least one normal template");
        }
        if (abnormal_templates.empty()) {
            throw SchemaError("class '" + class_name + "': needs at least one abnormal template");
        }
        std::set<std::string> seen_keywords;
        for (const std::string& k : keywords) {
            if (!seen_keywords.insert(k).second) {
                throw SchemaError("class '" + class_name + "': duplicate keyword '" + k + "'");
            }
            if (keyword_prompts.find(k) == keyword_prompts.end()) {
                throw SchemaError("class '" + class_name + "': keyword '" + k + "' has no prompt");
            }
        }
        if (keyword_prompts.size() != keywords.size()) {
            throw SchemaError("class '" + class_name + "': keyword_prompts does not match keywords");
        }
        std::set<std::string> seen;
        auto check = [&](const std::string& s, const char* field) {
            if (!seen.insert(s).second) {
                throw SchemaError("class '" + class_name + "': duplicate prompt in " +
                                  std::string(field) + ": '" + s + "'");
            }
        };
        for (const auto& s : normal_templates) check(s, "normal_templates");
        for (const auto& s : abnormal_templates) check(s, "abnormal_templates");
        for (const auto& k : keywords) check(keyword_prompts.at(k), "keywords");
    }
};

/// A loaded bank preserves file order, so serialization round-trips.
struct PromptBank {
    std::vector<ClassPrompts> classes;

    const ClassPrompts& require_class(const std::string& name) const {
        for (const ClassPrompts& cp : classes) {
            if (cp.class_name == name) return cp;
        }
        throw ValueError("prompt bank: unknown class '" + name + "'");
    }
};

/// The embedded prompt ensemble for one class. Row order: all normal
/// templates, then all abnormal templates, then all keyword prompts, each
/// block in file order. abnormal_mask is false exactly on the normal block.
struct PromptMatrix {
    std::vector<std::string> prompts;
    Tensor embeddings;                // L2_total x c2, rows unit-norm
    std::vector<bool> abnormal_mask;  // length L2_total
    std::size_t n_normal = 0;
    std::size_t n_abnormal = 0;
    std::size_t n_keyword = 0;

    std::size_t rows() const { return prompts.size(); }
};

namespace detail {

inline void reject_unknown_fields(const nlohmann::json& obj, const std::set<std::string>& known,
                                  const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (known.find(it.key()) == known.end()) {
            throw SchemaError("prompt bank: unknown field '" + it.key() + "' in " + where);
        }
    }
}

inline std::vector<std::string> string_array(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array()) throw SchemaError("prompt bank: " + where + " must be an array");
    std::vector<std::string> out;
    for (const auto& e : j) {
        if (!e.is_string()) throw SchemaError("prompt bank: " + where + " must hold strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

}  // namespace detail

/// Substitutes the class name into "{class}" placeholders. Any other
/// placeholder is a template error.
inline std::string substitute_class(const std::string& tmpl, const std::string& class_name) {
    std::string out;
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            const std::size_t close = tmpl.find('}', i);
            if (close == std::string::npos) {
                throw ValueError("template '" + tmpl + "': unterminated placeholder");
            }
            const std::string name = tmpl.substr(i + 1, close - i - 1);
            if (name != "class") {
                throw ValueError("template '" + tmpl + "': unknown placeholder '{" + name + "}'");
            }
            out += class_name;
            i = close + 1;
        } else {
            out += tmpl[i++];
        }
    }
    return out;
}

/// Expands a class's prompts in the canonical block order.
inline std::vector<std::string> expand_templates(const ClassPrompts& cp) {
    cp.validate();
    std::vector<std::string> out;
    for (const auto& t : cp.normal_templates) out.push_back(substitute_class(t, cp.class_name));
    for (const auto& t : cp.abnormal_templates) out.push_back(substitute_class(t, cp.class_name));
    for (const auto& k : cp.keywords) {
        out.push_back(substitute_class(cp.keyword_prompts.at(k), cp.class_name));
    }
    std::set<std::string> seen;
    for (const auto& s : out) {
        if (!seen.insert(s).second) {
            throw ValueError("class '" + cp.class_name + "': duplicate prompt after expansion: '" +
                             s + "'");
        }
    }
    return out;
}

inline PromptBank parse_prompt_bank(const nlohmann::json& root) {
    if (!root.is_object()) throw SchemaError("prompt bank: top level must be an object");
    detail::reject_unknown_fields(root, {"version", "classes"}, "top level");
    if (!root.contains("version") || !root["version"].is_number_integer() || root["version"] != 1) {
        throw SchemaError("prompt bank: missing or unsupported version (expected 1)");
    }
    if (!root.contains("classes") || !root["classes"].is_array()) {
        throw SchemaError("prompt bank: missing classes array");
    }
    PromptBank bank;
    std::set<std::string> names;
    for (const auto& jc : root["classes"]) {
        if (!jc.is_object()) throw SchemaError("prompt bank: class entries must be objects");
        detail::reject_unknown_fields(
            jc, {"name", "normal_templates", "abnormal_templates", "keywords"}, "class entry");
        ClassPrompts cp;
        if (!jc.contains("name") || !jc["name"].is_string()) {
            throw SchemaError("prompt bank: class entry missing name");
        }
        cp.class_name = jc["name"].get<std::string>();
        if (!names.insert(cp.class_name).second) {
            throw SchemaError("prompt bank: duplicate class name '" + cp.class_name + "'");
        }
        cp.normal_templates = detail::string_array(jc.value("normal_templates", nlohmann::json::array()),
                                                   "normal_templates of '" + cp.class_name + "'");
        cp.abnormal_templates =
            detail::string_array(jc.value("abnormal_templates", nlohmann::json::array()),
                                 "abnormal_templates of '" + cp.class_name + "'");
        if (jc.contains("keywords")) {
            if (!jc["keywords"].is_array()) {
                throw SchemaError("prompt bank: keywords of '" + cp.class_name + "' must be an array");
            }
            for (const auto& jk : jc["keywords"]) {
                if (!jk.is_object()) {
                    throw SchemaError("prompt bank: keyword entries of '" + cp.class_name +
                                      "' must be objects");
                }
                detail::reject_unknown_fields(jk, {"keyword", "prompt"},
                                              "keyword entry of '" + cp.class_name + "'");
                if (!jk.contains("keyword") || !jk["keyword"].is_string() || !jk.contains("prompt") ||
                    !jk["prompt"].is_string()) {
                    throw SchemaError("prompt bank: keyword entry of '" + cp.class_name +
                                      "' needs string fields keyword and prompt");
                }
                const std::string kw = jk["keyword"].get<std::string>();
                if (!cp.keyword_prompts.emplace(kw, jk["prompt"].get<std::string>()).second) {
                    throw SchemaError("class '" + cp.class_name + "': duplicate keyword '" + kw + "'");
                }
                cp.keywords.push_back(kw);
            }
        }
        cp.validate();
        bank.classes.push_back(std::move(cp));
    }
    return bank;
}

inline PromptBank load_prompt_bank(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw IoError("prompt bank: no such file: " + path.string());
    }
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("prompt bank: " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_prompt_bank(root);
}

/// Canonical serialized form; load(serialize(load(f))) == load(f).
inline std::string serialize_prompt_bank(const PromptBank& bank) {
    nlohmann::ordered_json root;
    root["version"] = 1;
    root["classes"] = nlohmann::ordered_json::array();
    for (const ClassPrompts& cp : bank.classes) {
        nlohmann::ordered_json jc;
        jc["name"] = cp.class_name;
        jc["normal_templates"] = cp.normal_templates;
        jc["abnormal_templates"] = cp.abnormal_templates;
        jc["keywords"] = nlohmann::ordered_json::array();
        for (const std::string& k : cp.keywords) {
            jc["keywords"].push_back({{"keyword", k}, {"prompt", cp.keyword_prompts.at(k)}});
        }
        root["classes"].push_back(std::move(jc));
    }
    return root.dump(2) + "\n";
}

/// Embeds a class's expanded prompt list. Rows are unit-norm, the mask marks
/// the abnormal-template and keyword blocks.
inline PromptMatrix build_prompt_matrix(const ClassPrompts& cp, const TextEncoder& encoder) {
    PromptMatrix pm;
    pm.prompts = expand_templates(cp);
    pm.n_normal = cp.normal_templates.size();
    pm.n_abnormal = cp.abnormal_templates.size();
    pm.n_keyword = cp.keywords.size();

    Tensor first = encoder.encode(pm.prompts.front());
    const std::size_t c2 = first.extent(1);
    pm.embeddings = Tensor({pm.prompts.size(), c2});
    for (std::size_t i = 0; i < pm.prompts.size(); ++i) {
        const Tensor row = i == 0 ? first : encoder.encode(pm.prompts[i]);
        for (std::size_t j = 0; j < c2; ++j) pm.embeddings.at(i, j) = row.at(0, j);
    }
    pm.abnormal_mask.assign(pm.prompts.size(), true);
    for (std::size_t i = 0; i < pm.n_normal; ++i) pm.abnormal_mask[i] = false;
    return pm;
}

/// Per-category mean embeddings of the two-class template ensemble:
/// row 0 = mean of normal-template rows, row 1 = mean of abnormal-template
/// rows (keyword prompts excluded).
inline Tensor win_category_embeddings(const PromptMatrix& pm) {
    const std::size_t c2 = pm.embeddings.extent(1);
    Tensor out({std::size_t{2}, c2});
    for (std::size_t j = 0; j < c2; ++j) {
        double sn = 0.0, sa = 0.0;
        for (std::size_t i = 0; i < pm.n_normal; ++i) sn += pm.embeddings.at(i, j);
        for (std::size_t i = pm.n_normal; i < pm.n_normal + pm.n_abnormal; ++i)
            sa += pm.embeddings.at(i, j);
        out.at(0, j) = sn / static_cast<double>(pm.n_normal);
        out.at(1, j) = sa / static_cast<double>(pm.n_abnormal);
    }
    return out;
}

}  // namespace aforge
