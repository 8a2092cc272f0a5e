// SPDX-License-Identifier: Apache-2.0
#include "gar/minishop.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/core.h>

#include "gar/error.hpp"

namespace gar::minishop {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::string trim(const std::string& s) {
    auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

}  // namespace

Price Price::from_dollars(double dollars) {
    return Price{static_cast<std::int64_t>(std::llround(dollars * 100.0))};
}

std::string Price::str() const {
    return fmt::format("${}.{:02d}", cents / 100, cents % 100);
}

double category_match(const Product& product, const ShoppingGoal& goal) {
    return product.category == goal.target_category ? 1.0 : 0.0;
}

double compute_reward(const ShoppingGoal& goal, const Purchase& purchase, const TextMatch& text_match) {
    const double r_type = text_match ? text_match(purchase.product, goal) : category_match(purchase.product, goal);
    if (r_type <= 0.0) return 0.0;

    std::size_t matched_attributes = 0;
    for (const auto& attr : goal.required_attributes) {
        if (purchase.product.attributes.count(attr)) ++matched_attributes;
    }
    std::size_t matched_options = 0;
    for (const auto& [name, value] : goal.required_options) {
        auto it = purchase.selected_options.find(name);
        if (it != purchase.selected_options.end() && it->second == value) ++matched_options;
    }
    const std::size_t price_ok = purchase.paid_price <= goal.price_cap ? 1 : 0;

    const double numerator = static_cast<double>(matched_attributes + matched_options + price_ok);
    const double denominator = static_cast<double>(goal.required_attributes.size() + goal.required_options.size() + 1);
    return std::clamp(r_type, 0.0, 1.0) * numerator / denominator;
}

// --- catalog -----------------------------------------------------------------------

Catalog::Catalog(std::vector<Product> products) : products_(std::move(products)) {
    std::sort(products_.begin(), products_.end(), [](const Product& a, const Product& b) { return a.asin < b.asin; });
    for (std::size_t i = 0; i < products_.size(); ++i) {
        if (!by_asin_.emplace(products_[i].asin, i).second) {
            throw ConfigError("duplicate asin in catalog: " + products_[i].asin);
        }
    }
}

const Product* Catalog::find(const std::string& asin) const {
    auto it = by_asin_.find(asin);
    return it == by_asin_.end() ? nullptr : &products_[it->second];
}

std::vector<const Product*> Catalog::search(const std::string& query) const {
    auto query_tokens = tokenize(query);
    std::sort(query_tokens.begin(), query_tokens.end());
    query_tokens.erase(std::unique(query_tokens.begin(), query_tokens.end()), query_tokens.end());
    if (query_tokens.empty()) return {};

    std::vector<std::pair<std::size_t, const Product*>> scored;
    for (const auto& product : products_) {
        auto words = tokenize(product.title + " " + product.category);
        std::sort(words.begin(), words.end());
        std::size_t hits = 0;
        for (const auto& token : query_tokens) {
            if (std::binary_search(words.begin(), words.end(), token)) ++hits;
        }
        if (hits > 0) scored.emplace_back(hits, &product);
    }
    // products_ is asin-sorted, so a stable sort on hits keeps the asin tie order.
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<const Product*> out;
    out.reserve(scored.size());
    for (const auto& [hits, product] : scored) out.push_back(product);
    return out;
}

Product product_from_json(const json& j) {
    Product p;
    try {
        p.asin = j.at("asin").get<std::string>();
        p.title = j.at("title").get<std::string>();
        const double price = j.at("price").get<double>();
        if (!(price >= 0.0)) throw ConfigError("product " + p.asin + " has a negative price");
        p.price = Price::from_dollars(price);
        p.category = lower(j.at("category").get<std::string>());
        for (const auto& a : j.value("attributes", json::array())) p.attributes.insert(lower(a.get<std::string>()));
        const json options = j.value("options", json::object());
        for (const auto& [name, values] : options.items()) {
            auto& slot = p.options[lower(name)];
            for (const auto& v : values) slot.push_back(lower(v.get<std::string>()));
        }
        p.description = j.value("description", std::string{});
    } catch (const json::exception& e) {
        throw ConfigError("invalid product record " + (p.asin.empty() ? j.dump().substr(0, 60) : p.asin) + ": " + e.what());
    }
    if (p.asin.empty()) throw ConfigError("product record without asin");
    return p;
}

json product_to_json(const Product& p) {
    json options = json::object();
    for (const auto& [name, values] : p.options) options[name] = values;
    return json{{"asin", p.asin},
                {"title", p.title},
                {"price", p.price.dollars()},
                {"category", p.category},
                {"attributes", p.attributes},
                {"options", options},
                {"description", p.description}};
}

Catalog catalog_from_json(const json& doc) {
    if (!doc.is_array()) throw ConfigError("catalog must be a JSON array of products");
    std::vector<Product> products;
    products.reserve(doc.size());
    for (const auto& item : doc) products.push_back(product_from_json(item));
    return Catalog(std::move(products));
}

Catalog load_catalog(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open catalog " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("catalog " + path.string() + " is not valid JSON: " + e.what());
    }
    return catalog_from_json(doc);
}

ShoppingGoal goal_from_json(const json& j) {
    ShoppingGoal g;
    try {
        g.id = j.value("id", std::string{});
        g.instruction = j.at("instruction").get<std::string>();
        g.target_category = lower(j.at("target_category").get<std::string>());
        for (const auto& a : j.value("required_attributes", json::array())) {
            g.required_attributes.insert(lower(a.get<std::string>()));
        }
        const json options = j.value("required_options", json::object());
        for (const auto& [name, value] : options.items()) {
            g.required_options[lower(name)] = lower(value.get<std::string>());
        }
        g.price_cap = Price::from_dollars(j.at("price_cap").get<double>());
    } catch (const json::exception& e) {
        throw ConfigError("invalid goal record " + g.id + ": " + e.what());
    }
    if (g.price_cap.cents <= 0) throw ConfigError("goal " + g.id + " needs a positive price_cap");
    return g;
}

json goal_to_json(const ShoppingGoal& g) {
    json options = json::object();
    for (const auto& [name, value] : g.required_options) options[name] = value;
    return json{{"id", g.id},
                {"instruction", g.instruction},
                {"target_category", g.target_category},
                {"required_attributes", g.required_attributes},
                {"required_options", options},
                {"price_cap", g.price_cap.dollars()}};
}

std::vector<ShoppingGoal> load_goals(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open goal file " + path.string());
    std::vector<ShoppingGoal> goals;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (trim(line).empty()) continue;
        try {
            goals.push_back(goal_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw ConfigError(fmt::format("{}:{}: {}", path.string(), number, e.what()));
        }
    }
    return goals;
}

std::string initial_observation(const ShoppingGoal& goal) {
    return goal.instruction + "\n[Search]";
}

// --- environment ------------------------------------------------------------------------

MiniShopEnv::MiniShopEnv(std::shared_ptr<const Catalog> catalog, TextMatch text_match)
    : catalog_(std::move(catalog)), text_match_(std::move(text_match)) {
    if (!catalog_) throw ContractViolation("minishop needs a catalog");
    if (!text_match_) text_match_ = category_match;
}

std::string MiniShopEnv::reset(const json& task_config) {
    goal_ = goal_from_json(task_config);
    page_ = Page::search;
    query_.clear();
    results_.clear();
    results_page_ = 1;
    product_ = nullptr;
    selected_.clear();
    started_ = true;
    return initial_observation(goal_);
}

namespace {

// Splits "verb[argument]" into (lower-cased verb, argument).
std::optional<std::pair<std::string, std::string>> split_action(const std::string& action) {
    auto text = trim(action);
    auto open = text.find('[');
    auto close = text.rfind(']');
    if (open == std::string::npos || close == std::string::npos || close < open || close != text.size() - 1) {
        return std::nullopt;
    }
    return std::make_pair(lower(trim(text.substr(0, open))), trim(text.substr(open + 1, close - open - 1)));
}

}  // namespace

EnvObservation MiniShopEnv::step(const std::string& action) {
    if (!started_) throw ContractViolation("step() before reset()");
    const EnvObservation nothing{std::string(kNothingHappens), 0.0, page_ == Page::done, false};
    if (page_ == Page::done) return nothing;
    auto parsed = split_action(action);
    if (!parsed) return nothing;
    if (parsed->first == "search") return search(parsed->second);
    if (parsed->first == "click") return click(parsed->second);
    return nothing;
}

std::size_t MiniShopEnv::page_count() const {
    return std::max<std::size_t>(1, (results_.size() + kResultsPerPage - 1) / kResultsPerPage);
}

EnvObservation MiniShopEnv::search(const std::string& query) {
    if (page_ != Page::search) return EnvObservation{std::string(kNothingHappens), 0.0, false, false};
    query_ = query;
    results_ = catalog_->search(query);
    results_page_ = 1;
    page_ = Page::results;
    return EnvObservation{render_results_page(), 0.0, false, true};
}

std::string MiniShopEnv::render_results_page() const {
    std::ostringstream out;
    out << "[Back to Search]\n";
    out << "Page " << results_page_ << " (Total results: " << results_.size() << ")\n";
    if (results_page_ > 1) out << "[< Prev]\n";
    if (results_page_ < page_count()) out << "[Next >]\n";
    const auto begin = (results_page_ - 1) * kResultsPerPage;
    const auto end = std::min(results_.size(), begin + kResultsPerPage);
    for (auto i = begin; i < end; ++i) {
        out << '[' << results_[i]->asin << "]\n" << results_[i]->title << '\n' << results_[i]->price.str() << '\n';
    }
    auto text = out.str();
    text.pop_back();
    return text;
}

std::string MiniShopEnv::render_product_page() const {
    std::ostringstream out;
    out << "[Back to Search]\n[< Prev]\n";
    for (const auto& [name, values] : product_->options) {
        out << name;
        for (const auto& v : values) out << " [" << v << ']';
        out << '\n';
    }
    out << product_->title << '\n';
    out << "Price: " << product_->price.str() << '\n';
    out << "Rating: N.A.\n";
    out << "Description: " << product_->description << '\n';
    out << "[Buy Now]";
    return out.str();
}

std::vector<std::string> MiniShopEnv::visible_targets() const {
    std::vector<std::string> targets;
    switch (page_) {
        case Page::results: {
            targets.push_back("Back to Search");
            if (results_page_ > 1) targets.push_back("< Prev");
            if (results_page_ < page_count()) targets.push_back("Next >");
            const auto begin = (results_page_ - 1) * kResultsPerPage;
            const auto end = std::min(results_.size(), begin + kResultsPerPage);
            for (auto i = begin; i < end; ++i) targets.push_back(results_[i]->asin);
            break;
        }
        case Page::product:
            targets.push_back("Back to Search");
            targets.push_back("< Prev");
            for (const auto& [name, values] : product_->options) {
                for (const auto& v : values) targets.push_back(v);
            }
            targets.push_back("Buy Now");
            break;
        default:
            break;
    }
    return targets;
}

EnvObservation MiniShopEnv::click(const std::string& raw_target) {
    const EnvObservation nothing{std::string(kNothingHappens), 0.0, false, false};
    const auto target = lower(trim(raw_target));
    const auto visible = visible_targets();
    auto it = std::find_if(visible.begin(), visible.end(), [&](const std::string& v) { return lower(v) == target; });
    if (it == visible.end()) return nothing;

    if (target == "back to search") {
        page_ = Page::search;
        query_.clear();
        results_.clear();
        results_page_ = 1;
        product_ = nullptr;
        selected_.clear();
        return EnvObservation{initial_observation(goal_), 0.0, false, true};
    }

    if (page_ == Page::results) {
        if (target == "next >") {
            ++results_page_;
        } else if (target == "< prev") {
            --results_page_;
        } else {
            product_ = catalog_->find(*it);
            selected_.clear();
            page_ = Page::product;
            return EnvObservation{render_product_page(), 0.0, false, true};
        }
        return EnvObservation{render_results_page(), 0.0, false, true};
    }

    // product page
    if (target == "< prev") {
        product_ = nullptr;
        selected_.clear();
        page_ = Page::results;
        return EnvObservation{render_results_page(), 0.0, false, true};
    }
    if (target == "buy now") {
        Purchase purchase{*product_, selected_, product_->price};
        const double reward = compute_reward(goal_, purchase, text_match_);
        page_ = Page::done;
        return EnvObservation{fmt::format("Thank you for shopping with us! Your score (min 0.0, max 1.0): {:.2f}", reward),
                              reward, true, true};
    }
    for (const auto& [name, values] : product_->options) {
        if (std::find(values.begin(), values.end(), target) != values.end()) {
            selected_[name] = target;
            break;
        }
    }
    return EnvObservation{"You have clicked " + target + ".", 0.0, false, true};
}

std::string MiniShopEnv::state_digest() const {
    std::ostringstream out;
    out << "page=" << static_cast<int>(page_) << ";query=" << query_ << ";results=" << results_.size()
        << ";results_page=" << results_page_ << ";product=" << (product_ ? product_->asin : "-") << ";selected=";
    for (const auto& [name, value] : selected_) out << name << ':' << value << ',';
    out << ";goal=" << goal_.id;
    return out.str();
}

std::vector<std::string> MiniShopEnv::available_actions() const {
    std::vector<std::string> actions;
    if (page_ == Page::done) return actions;
    if (page_ == Page::search) {
        actions.push_back("search[" + goal_.instruction + "]");
        actions.push_back("search[" + goal_.target_category + "]");
        for (const auto& attr : goal_.required_attributes) actions.push_back("search[" + attr + " " + goal_.target_category + "]");
        return actions;
    }
    for (const auto& target : visible_targets()) actions.push_back("click[" + target + "]");
    return actions;
}

}  // namespace gar::minishop
