#pragma once

#include "hwi/error.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace hwilab {

/// Binds each option to a variable once, so it can be set from the command
/// line or from a JSON config file (command line wins), and echoed back as
/// the resolved configuration.
class OptionSet {
public:
    using Target = std::variant<std::string*, double*, std::size_t*, unsigned*, bool*,
                                std::vector<std::string>*, std::vector<double>*, std::vector<std::size_t>*>;

    explicit OptionSet(CLI::App* app) : app_(app) {}

    template <class T>
    OptionSet& add(const std::string& name, T* target, const std::string& help, bool required = false) {
        if constexpr (std::is_same_v<T, bool>) {
            app_->add_flag("--" + name, *target, help);
        } else {
            auto* opt = app_->add_option("--" + name, *target, help);
            if constexpr (!std::is_same_v<T, std::vector<std::string>> && !std::is_same_v<T, std::vector<double>> &&
                          !std::is_same_v<T, std::vector<std::size_t>>) {
                opt->capture_default_str();
            }
        }
        entries_.push_back({name, Target(target), required});
        return *this;
    }

    /// Fills options absent from the command line from `config`; rejects keys
    /// that no option (or `extra_keys`) claims.
    void apply(const nlohmann::json& config, const std::set<std::string>& extra_keys) {
        if (config.is_null()) return;
        if (!config.is_object()) throw hwi::UsageError("config: top level must be a JSON object");
        for (const auto& [key, value] : config.items()) {
            if (extra_keys.count(key)) continue;
            const Entry* e = find(key);
            if (e == nullptr) throw hwi::UsageError("config: unknown key '" + key + "'");
            if (app_->count("--" + key) > 0) continue;
            assign(*e, value);
        }
        config_keys_.clear();
        for (const auto& [key, value] : config.items()) config_keys_.insert(key);
    }

    void check_required() const {
        for (const auto& e : entries_) {
            if (e.required && app_->count("--" + e.name) == 0 && config_keys_.count(e.name) == 0) {
                throw hwi::UsageError("missing required option --" + e.name);
            }
        }
    }

    [[nodiscard]] bool given(const std::string& name) const {
        return app_->count("--" + name) > 0 || config_keys_.count(name) > 0;
    }

    [[nodiscard]] nlohmann::ordered_json resolved() const {
        nlohmann::ordered_json j;
        for (const auto& e : entries_) {
            std::visit([&](auto* p) { j[e.name] = *p; }, e.target);
        }
        return j;
    }

private:
    struct Entry {
        std::string name;
        Target target;
        bool required;
    };

    const Entry* find(const std::string& name) const {
        for (const auto& e : entries_) {
            if (e.name == name) return &e;
        }
        return nullptr;
    }

    static void assign(const Entry& e, const nlohmann::json& v) {
        try {
            std::visit(
                [&](auto* p) {
                    using T = std::remove_pointer_t<decltype(p)>;
                    if constexpr (std::is_same_v<T, std::string>) {
                        // Nested arrays (e.g. group counts) are accepted in JSON form.
                        *p = v.is_string() ? v.get<std::string>() : v.dump();
                    } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
                        *p = v.is_array() ? v.get<T>() : T{v.get<std::string>()};
                    } else if constexpr (std::is_same_v<T, std::vector<double>> || std::is_same_v<T, std::vector<std::size_t>>) {
                        *p = v.is_array() ? v.get<T>() : T{v.get<typename T::value_type>()};
                    } else {
                        *p = v.get<T>();
                    }
                },
                e.target);
        } catch (const nlohmann::json::exception&) {
            throw hwi::UsageError("config: key '" + e.name + "' has the wrong type");
        }
    }

    CLI::App* app_;
    std::vector<Entry> entries_;
    std::set<std::string> config_keys_;
};

} // namespace hwilab
