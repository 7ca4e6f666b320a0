// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace webpilot {

/// Truncates to at most `max_chars` UTF-8 code points.
std::string truncate_utf8(std::string_view s, std::size_t max_chars);
std::size_t utf8_length(std::string_view s);

class Goal {
public:
    Goal(std::string text, std::string starting_url);

    const std::string& text() const { return text_; }
    const std::string& starting_url() const { return starting_url_; }

    bool operator==(const Goal&) const = default;

private:
    std::string text_;
    std::string starting_url_;
};

enum class PlanProvenance { user_supplied, generated, replanned };

std::string_view to_string(PlanProvenance p);
std::optional<PlanProvenance> parse_plan_provenance(std::string_view s);

/// The plan prompt that conditions action generation. Revision 0 is the initial plan;
/// every replan produces the next revision.
class Plan {
public:
    Plan(std::string text, int revision, PlanProvenance provenance);

    static Plan user_supplied(std::string text) { return {std::move(text), 0, PlanProvenance::user_supplied}; }
    static Plan generated(std::string text) { return {std::move(text), 0, PlanProvenance::generated}; }

    /// The plan that replaces this one after replanning.
    Plan revised(std::string text) const { return {std::move(text), revision_ + 1, PlanProvenance::replanned}; }

    const std::string& text() const { return text_; }
    int revision() const { return revision_; }
    PlanProvenance provenance() const { return provenance_; }

    bool operator==(const Plan&) const = default;

private:
    std::string text_;
    int revision_;
    PlanProvenance provenance_;
};

class ActionDescription {
public:
    ActionDescription(std::string text, int step_index);

    const std::string& text() const { return text_; }
    int step_index() const { return step_index_; }

    bool operator==(const ActionDescription&) const = default;

private:
    std::string text_;
    int step_index_;
};

enum class ActionKind { navigate, click, fill, select_option, scroll, upload_file, scrape, go_back, finish };

inline constexpr ActionKind all_action_kinds[] = {
    ActionKind::navigate, ActionKind::click,  ActionKind::fill,    ActionKind::select_option, ActionKind::scroll,
    ActionKind::upload_file, ActionKind::scrape, ActionKind::go_back, ActionKind::finish,
};

std::string_view to_string(ActionKind k);
std::optional<ActionKind> parse_action_kind(std::string_view s);
bool requires_selector(ActionKind k);

using ActionArguments = std::map<std::string, std::string>;

/// An executable browser command derived from an ActionDescription.
class GroundedAction {
public:
    GroundedAction(ActionKind kind, std::optional<std::string> selector, ActionArguments arguments, int source_step);

    ActionKind kind() const { return kind_; }
    const std::optional<std::string>& selector() const { return selector_; }
    const ActionArguments& arguments() const { return arguments_; }
    std::optional<std::string> argument(const std::string& key) const;
    int source_step() const { return source_step_; }

    bool operator==(const GroundedAction&) const = default;

private:
    ActionKind kind_;
    std::optional<std::string> selector_;
    ActionArguments arguments_;
    int source_step_;
};

struct BoundingBox {
    double x = 0;
    double y = 0;
    double width = 0;
    double height = 0;

    bool operator==(const BoundingBox&) const = default;
};

struct ElementInfo {
    std::string tag;
    std::optional<std::string> id_attr;
    std::optional<std::string> name_attr;
    std::optional<std::string> role;
    std::optional<std::string> aria_label;
    std::optional<std::string> type_attr;
    std::vector<std::string> classes;
    int sibling_index = 1;
    std::string text_excerpt;   // at most 80 characters
    std::optional<int> mark_id;

    bool operator==(const ElementInfo&) const = default;
};

void validate(const ElementInfo& e);

struct SomMark {
    int mark_id = 0;
    BoundingBox box;
    std::string element_ref;

    bool operator==(const SomMark&) const = default;
};

enum class Feature : std::uint8_t { axtree, dom, screenshot, som, interactive_elements };

std::string_view to_string(Feature f);
std::optional<Feature> parse_feature(std::string_view s);

class FeatureSet {
public:
    FeatureSet() = default;
    FeatureSet(std::initializer_list<Feature> features);

    bool contains(Feature f) const { return (bits_ & bit(f)) != 0; }
    void insert(Feature f) { bits_ |= bit(f); }
    bool empty() const { return bits_ == 0; }
    bool subset_of(FeatureSet other) const { return (bits_ & ~other.bits_) == 0; }
    std::vector<Feature> list() const;

    /// Comma-separated names, e.g. "interactive_elements,som".
    static FeatureSet parse(std::string_view csv);
    std::string to_string() const;

    bool operator==(const FeatureSet&) const = default;

private:
    static std::uint8_t bit(Feature f) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(f)); }
    std::uint8_t bits_ = 0;
};

/// Opaque screenshot handle; PNG bytes shared between copies.
struct ImageHandle {
    std::shared_ptr<const std::vector<std::uint8_t>> png;
    int width = 0;
    int height = 0;

    bool empty() const { return !png || png->empty(); }
    bool operator==(const ImageHandle& o) const { return png == o.png || (png && o.png && *png == *o.png); }
};

/// Reads width and height from a PNG IHDR chunk.
std::optional<std::pair<int, int>> png_dimensions(const std::vector<std::uint8_t>& bytes);

struct ObservationFields {
    std::optional<std::string> axtree_text;
    std::optional<std::string> dom_snapshot;
    bool dom_truncated = false;
    std::optional<ImageHandle> screenshot;
    std::optional<std::vector<SomMark>> som;
    std::optional<std::vector<ElementInfo>> interactive_elements;
};

/// A bundle of page features captured at one instant. Only the requested features are present.
class Observation {
public:
    Observation(FeatureSet features, std::string url, ObservationFields fields = {});

    FeatureSet features() const { return features_; }
    const std::string& url() const { return url_; }
    const std::optional<std::string>& axtree_text() const { return fields_.axtree_text; }
    const std::optional<std::string>& dom_snapshot() const { return fields_.dom_snapshot; }
    bool dom_truncated() const { return fields_.dom_truncated; }
    const std::optional<ImageHandle>& screenshot() const { return fields_.screenshot; }
    const std::optional<std::vector<SomMark>>& som() const { return fields_.som; }
    const std::optional<std::vector<ElementInfo>>& interactive_elements() const { return fields_.interactive_elements; }

    /// The element carrying `mark_id`, looked up through the interactive element list.
    const ElementInfo* element_for_mark(int mark_id) const;
    bool has_mark(int mark_id) const;

private:
    FeatureSet features_;
    std::string url_;
    ObservationFields fields_;
};

enum class EvaluationStatus { success, failure };

std::string_view to_string(EvaluationStatus s);

inline constexpr std::size_t page_summary_limit = 400;

/// Execution feedback for one action; the r_t fed back into the policy.
class EvaluationRecord {
public:
    EvaluationRecord(EvaluationStatus status, std::string message, std::string page_summary);

    /// Factories truncate the page summary to the 400-character cap.
    static EvaluationRecord success(std::string message, std::string_view page_summary = {});
    static EvaluationRecord failure(std::string message, std::string_view page_summary = {});

    EvaluationStatus status() const { return status_; }
    bool ok() const { return status_ == EvaluationStatus::success; }
    const std::string& message() const { return message_; }
    const std::string& page_summary() const { return page_summary_; }

    bool operator==(const EvaluationRecord&) const = default;

private:
    EvaluationStatus status_;
    std::string message_;
    std::string page_summary_;
};

/// One executed step. `grounded` is empty when grounding failed and nothing reached the browser.
class TrajectoryStep {
public:
    TrajectoryStep(ActionDescription action, std::optional<GroundedAction> grounded, EvaluationRecord evaluation,
                   std::string pre_url, std::string post_url);

    const ActionDescription& action() const { return action_; }
    const std::optional<GroundedAction>& grounded() const { return grounded_; }
    const EvaluationRecord& evaluation() const { return evaluation_; }
    const std::string& pre_url() const { return pre_url_; }
    const std::string& post_url() const { return post_url_; }

    bool operator==(const TrajectoryStep&) const = default;

private:
    ActionDescription action_;
    std::optional<GroundedAction> grounded_;
    EvaluationRecord evaluation_;
    std::string pre_url_;
    std::string post_url_;
};

class Trajectory {
public:
    Trajectory(Goal goal, Plan initial_plan, std::vector<TrajectoryStep> steps = {});

    const Goal& goal() const { return goal_; }
    const Plan& initial_plan() const { return initial_plan_; }
    const std::vector<TrajectoryStep>& steps() const { return steps_; }
    std::size_t size() const { return steps_.size(); }
    bool empty() const { return steps_.empty(); }

    /// Returns a copy with `step` appended; its step index must equal size().
    Trajectory appended(TrajectoryStep step) const;
    void append(TrajectoryStep step);

    bool operator==(const Trajectory&) const = default;

private:
    Goal goal_;
    Plan initial_plan_;
    std::vector<TrajectoryStep> steps_;
};

} // namespace webpilot
