#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace loteval {

enum class Strategy { baseline, zero_shot_cot, legal_syllogism };

inline constexpr std::array<Strategy, 3> kAllStrategies = {
    Strategy::baseline, Strategy::zero_shot_cot, Strategy::legal_syllogism};

// Serialized names are exactly these three tokens everywhere (files, CLI, reports).
std::string_view to_string(Strategy s) noexcept;
std::optional<Strategy> strategy_from_string(std::string_view name) noexcept;

struct EmptyFact : std::runtime_error {
  EmptyFact() : std::runtime_error("fact is empty") {}
};

struct MissingPlaceholder : std::runtime_error {
  explicit MissingPlaceholder(std::string strategy_)
      : std::runtime_error("template for " + strategy_ +
                           " must contain the {fact} placeholder exactly once"),
        strategy(std::move(strategy_)) {}
  std::string strategy;
};

struct UnknownStrategyKey : std::runtime_error {
  explicit UnknownStrategyKey(std::string key_)
      : std::runtime_error("unknown strategy key: " + key_), key(std::move(key_)) {}
  std::string key;
};

struct PromptBundle {
  std::string case_id;
  Strategy strategy = Strategy::baseline;
  std::string text;
  std::string template_version;
};

// The three prompt templates. Rendering is placeholder-based assembly
// (prefix + fact + suffix), never search-replace, so a fact that happens to
// contain template text or a literal "{fact}" is still substituted exactly once.
class TemplateSet {
 public:
  static constexpr std::string_view kPlaceholder = "{fact}";

  // Built-in English templates.
  static TemplateSet defaults();

  // Defaults overridden per strategy from a JSON map
  // {"Baseline"|"ZeroShotCoT"|"LegalSyllogism": "template with {fact}"}.
  static TemplateSet from_file(const std::string& path);
  static TemplateSet from_overrides(const std::array<std::optional<std::string>, 3>& overrides);

  PromptBundle render(Strategy s, std::string_view fact, std::string_view case_id = {}) const;

  const std::string& raw(Strategy s) const;
  // Content digest over the three templates; cache keys include it.
  const std::string& version() const noexcept { return version_; }

 private:
  struct Slot {
    std::string raw;
    std::string prefix;
    std::string suffix;
  };

  TemplateSet() = default;
  void set(Strategy s, std::string tmpl);
  void finalize();

  std::array<Slot, 3> slots_;
  std::string version_;
};

}  // namespace loteval
