// SPDX-License-Identifier: Apache-2.0
#include "webpilot/core/types.hpp"

#include "webpilot/core/errors.hpp"
#include "webpilot/core/url.hpp"

#include <algorithm>
#include <array>
#include <set>

namespace webpilot {

namespace {

bool is_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(const std::array<std::string_view, N>& names, std::string_view s)
{
    for (std::size_t i = 0; i < N; ++i)
        if (names[i] == s)
            return static_cast<Enum>(i);
    return std::nullopt;
}

constexpr std::array<std::string_view, 3> provenance_names{"user_supplied", "generated", "replanned"};
constexpr std::array<std::string_view, 9> kind_names{"navigate", "click",  "fill",    "select_option", "scroll",
                                                     "upload_file", "scrape", "go_back", "finish"};
constexpr std::array<std::string_view, 5> feature_names{"axtree", "dom", "screenshot", "som", "interactive_elements"};

} // namespace

std::size_t utf8_length(std::string_view s)
{
    return static_cast<std::size_t>(std::ranges::count_if(s, [](char c) { return !is_continuation(static_cast<unsigned char>(c)); }));
}

std::string truncate_utf8(std::string_view s, std::size_t max_chars)
{
    std::size_t chars = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (is_continuation(static_cast<unsigned char>(s[i])))
            continue;
        if (chars == max_chars)
            return std::string(s.substr(0, i));
        ++chars;
    }
    return std::string(s);
}

Goal::Goal(std::string text, std::string starting_url) : text_(std::move(text)), starting_url_(std::move(starting_url))
{
    if (text_.empty())
        throw InvariantViolation("goal text must not be empty");
    if (!is_http_url(starting_url_))
        throw InvariantViolation("goal starting_url must be an absolute http(s) URL: " + starting_url_);
}

std::string_view to_string(PlanProvenance p) { return provenance_names.at(static_cast<std::size_t>(p)); }

std::optional<PlanProvenance> parse_plan_provenance(std::string_view s)
{
    return lookup<PlanProvenance>(provenance_names, s);
}

Plan::Plan(std::string text, int revision, PlanProvenance provenance)
    : text_(std::move(text)), revision_(revision), provenance_(provenance)
{
    if (revision_ < 0)
        throw InvariantViolation("plan revision must be non-negative");
    if ((revision_ == 0) != (provenance_ != PlanProvenance::replanned))
        throw InvariantViolation("plan revision 0 is reserved for user-supplied and generated plans");
}

ActionDescription::ActionDescription(std::string text, int step_index) : text_(std::move(text)), step_index_(step_index)
{
    if (text_.empty())
        throw InvariantViolation("action text must not be empty");
    if (step_index_ < 0)
        throw InvariantViolation("step_index must be non-negative");
}

std::string_view to_string(ActionKind k) { return kind_names.at(static_cast<std::size_t>(k)); }

std::optional<ActionKind> parse_action_kind(std::string_view s) { return lookup<ActionKind>(kind_names, s); }

bool requires_selector(ActionKind k)
{
    return k == ActionKind::click || k == ActionKind::fill || k == ActionKind::select_option
        || k == ActionKind::upload_file;
}

GroundedAction::GroundedAction(ActionKind kind, std::optional<std::string> selector, ActionArguments arguments,
                               int source_step)
    : kind_(kind), selector_(std::move(selector)), arguments_(std::move(arguments)), source_step_(source_step)
{
    if (requires_selector(kind_) && (!selector_ || selector_->empty()))
        throw InvariantViolation(std::string(to_string(kind_)) + " requires a non-empty selector");
    if (kind_ == ActionKind::navigate && !arguments_.contains("url"))
        throw InvariantViolation("navigate requires a url argument");
    if (kind_ == ActionKind::fill && !arguments_.contains("value"))
        throw InvariantViolation("fill requires a value argument");
    if (source_step_ < 0)
        throw InvariantViolation("source_step must be non-negative");
}

std::optional<std::string> GroundedAction::argument(const std::string& key) const
{
    auto it = arguments_.find(key);
    if (it == arguments_.end())
        return std::nullopt;
    return it->second;
}

void validate(const ElementInfo& e)
{
    if (e.tag.empty())
        throw InvariantViolation("element tag must not be empty");
    if (e.sibling_index < 1)
        throw InvariantViolation("sibling_index must be >= 1");
    if (utf8_length(e.text_excerpt) > 80)
        throw InvariantViolation("element text excerpt exceeds 80 characters");
}

std::string_view to_string(Feature f) { return feature_names.at(static_cast<std::size_t>(f)); }

std::optional<Feature> parse_feature(std::string_view s) { return lookup<Feature>(feature_names, s); }

FeatureSet::FeatureSet(std::initializer_list<Feature> features)
{
    for (auto f : features)
        insert(f);
}

std::vector<Feature> FeatureSet::list() const
{
    std::vector<Feature> out;
    for (std::size_t i = 0; i < feature_names.size(); ++i)
        if (contains(static_cast<Feature>(i)))
            out.push_back(static_cast<Feature>(i));
    return out;
}

FeatureSet FeatureSet::parse(std::string_view csv)
{
    FeatureSet out;
    while (!csv.empty()) {
        auto comma = csv.find(',');
        auto item = csv.substr(0, comma);
        while (!item.empty() && item.front() == ' ')
            item.remove_prefix(1);
        while (!item.empty() && item.back() == ' ')
            item.remove_suffix(1);
        if (!item.empty()) {
            auto f = parse_feature(item);
            if (!f)
                throw ParseError("unknown observation feature: " + std::string(item));
            out.insert(*f);
        }
        csv = comma == std::string_view::npos ? std::string_view{} : csv.substr(comma + 1);
    }
    return out;
}

std::string FeatureSet::to_string() const
{
    std::string out;
    for (auto f : list()) {
        if (!out.empty())
            out += ',';
        out += webpilot::to_string(f);
    }
    return out;
}

std::optional<std::pair<int, int>> png_dimensions(const std::vector<std::uint8_t>& bytes)
{
    static constexpr std::uint8_t signature[] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
    if (bytes.size() < 24 || !std::equal(std::begin(signature), std::end(signature), bytes.begin()))
        return std::nullopt;
    if (!std::equal(bytes.begin() + 12, bytes.begin() + 16, "IHDR"))
        return std::nullopt;
    auto be32 = [&](std::size_t at) {
        return static_cast<int>((bytes[at] << 24) | (bytes[at + 1] << 16) | (bytes[at + 2] << 8) | bytes[at + 3]);
    };
    return std::pair{be32(16), be32(20)};
}

Observation::Observation(FeatureSet features, std::string url, ObservationFields fields)
    : features_(features), url_(std::move(url)), fields_(std::move(fields))
{
    auto check = [&](Feature f, bool present) {
        if (features_.contains(f) != present)
            throw InvariantViolation("observation field " + std::string(webpilot::to_string(f))
                                     + (present ? " present without its feature flag" : " missing for requested feature"));
    };
    check(Feature::axtree, fields_.axtree_text.has_value());
    check(Feature::dom, fields_.dom_snapshot.has_value());
    check(Feature::screenshot, fields_.screenshot.has_value());
    check(Feature::som, fields_.som.has_value());
    check(Feature::interactive_elements, fields_.interactive_elements.has_value());

    if (fields_.som) {
        for (std::size_t i = 0; i < fields_.som->size(); ++i)
            if ((*fields_.som)[i].mark_id != static_cast<int>(i) + 1)
                throw InvariantViolation("SOM mark ids must be unique and contiguous from 1");
    }
    if (fields_.interactive_elements) {
        std::set<int> seen;
        for (auto const& e : *fields_.interactive_elements) {
            validate(e);
            if (e.mark_id && !seen.insert(*e.mark_id).second)
                throw InvariantViolation("duplicate mark id on interactive elements");
        }
    }
}

const ElementInfo* Observation::element_for_mark(int mark_id) const
{
    if (!fields_.interactive_elements)
        return nullptr;
    for (auto const& e : *fields_.interactive_elements)
        if (e.mark_id == mark_id)
            return &e;
    return nullptr;
}

bool Observation::has_mark(int mark_id) const
{
    if (fields_.som)
        return std::ranges::any_of(*fields_.som, [&](const SomMark& m) { return m.mark_id == mark_id; });
    return element_for_mark(mark_id) != nullptr;
}

std::string_view to_string(EvaluationStatus s) { return s == EvaluationStatus::success ? "success" : "failure"; }

EvaluationRecord::EvaluationRecord(EvaluationStatus status, std::string message, std::string page_summary)
    : status_(status), message_(std::move(message)), page_summary_(std::move(page_summary))
{
    if (status_ == EvaluationStatus::failure && message_.empty())
        throw InvariantViolation("failure evaluations need a message");
    if (utf8_length(page_summary_) > page_summary_limit)
        throw InvariantViolation("page summary exceeds 400 characters");
}

EvaluationRecord EvaluationRecord::success(std::string message, std::string_view page_summary)
{
    return {EvaluationStatus::success, std::move(message), truncate_utf8(page_summary, page_summary_limit)};
}

EvaluationRecord EvaluationRecord::failure(std::string message, std::string_view page_summary)
{
    return {EvaluationStatus::failure, std::move(message), truncate_utf8(page_summary, page_summary_limit)};
}

TrajectoryStep::TrajectoryStep(ActionDescription action, std::optional<GroundedAction> grounded,
                               EvaluationRecord evaluation, std::string pre_url, std::string post_url)
    : action_(std::move(action))
    , grounded_(std::move(grounded))
    , evaluation_(std::move(evaluation))
    , pre_url_(std::move(pre_url))
    , post_url_(std::move(post_url))
{
    if (grounded_ && grounded_->source_step() != action_.step_index())
        throw InvariantViolation("grounded action source_step does not match the action step_index");
}

Trajectory::Trajectory(Goal goal, Plan initial_plan, std::vector<TrajectoryStep> steps)
    : goal_(std::move(goal)), initial_plan_(std::move(initial_plan)), steps_(std::move(steps))
{
    for (std::size_t i = 0; i < steps_.size(); ++i)
        if (steps_[i].action().step_index() != static_cast<int>(i))
            throw InvariantViolation("trajectory step indices must be contiguous from 0 (step " + std::to_string(i)
                                     + " has index " + std::to_string(steps_[i].action().step_index()) + ")");
}

Trajectory Trajectory::appended(TrajectoryStep step) const
{
    Trajectory copy = *this;
    copy.append(std::move(step));
    return copy;
}

void Trajectory::append(TrajectoryStep step)
{
    if (step.action().step_index() != static_cast<int>(steps_.size()))
        throw InvariantViolation("appended step index must equal the trajectory length");
    steps_.push_back(std::move(step));
}

} // namespace webpilot
