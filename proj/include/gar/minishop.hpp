// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gar/environment.hpp"

namespace gar::minishop {

/// Currency amount in integer cents.
struct Price {
    std::int64_t cents = 0;

    static Price from_dollars(double dollars);
    double dollars() const noexcept { return static_cast<double>(cents) / 100.0; }
    /// "$44.99"
    std::string str() const;

    friend auto operator<=>(const Price&, const Price&) = default;
};

struct Product {
    std::string asin;
    std::string title;
    Price price;
    std::string category;
    std::set<std::string> attributes;
    std::map<std::string, std::vector<std::string>> options;  // option name -> values, in display order
    std::string description;
};

struct ShoppingGoal {
    std::string id;
    std::string instruction;
    std::string target_category;
    std::set<std::string> required_attributes;
    std::map<std::string, std::string> required_options;
    Price price_cap;
};

struct Purchase {
    Product product;
    std::map<std::string, std::string> selected_options;
    Price paid_price;
};

/// Type reward in [0, 1] comparing the purchased product with the goal.
using TextMatch = std::function<double(const Product&, const ShoppingGoal&)>;

/// 1 when the product's category equals the goal's target category, else 0.
double category_match(const Product& product, const ShoppingGoal& goal);

/// r_type * (matched attributes + matched options + [price <= cap]) / (|U_att| + |U_opt| + 1).
double compute_reward(const ShoppingGoal& goal, const Purchase& purchase, const TextMatch& text_match = category_match);

/// Read-only product collection, shareable between episodes.
class Catalog {
public:
    explicit Catalog(std::vector<Product> products);

    const std::vector<Product>& products() const noexcept { return products_; }
    const Product* find(const std::string& asin) const;

    /// Products with at least one query-token hit in title + category, most hits first,
    /// ties by ascending asin.
    std::vector<const Product*> search(const std::string& query) const;

private:
    std::vector<Product> products_;  // sorted by asin
    std::map<std::string, std::size_t> by_asin_;
};

/// Validating loaders. Throw ConfigError naming the offending record.
Catalog load_catalog(const std::filesystem::path& path);
Catalog catalog_from_json(const json& doc);
Product product_from_json(const json& j);
json product_to_json(const Product& p);
ShoppingGoal goal_from_json(const json& j);
json goal_to_json(const ShoppingGoal& g);
std::vector<ShoppingGoal> load_goals(const std::filesystem::path& path);

inline constexpr std::size_t kResultsPerPage = 3;

/// Webshop-style storefront. Actions: search[query] on the search page, click[target]
/// for targets visible on the current page.
class MiniShopEnv final : public Environment {
public:
    explicit MiniShopEnv(std::shared_ptr<const Catalog> catalog, TextMatch text_match = category_match);

    /// Config: a goal object (see goal_from_json).
    std::string reset(const json& task_config) override;
    EnvObservation step(const std::string& action) override;
    bool deterministic() const override { return true; }
    std::string name() const override { return "minishop"; }
    std::string state_digest() const override;
    std::vector<std::string> available_actions() const override;

    EnvObservation search(const std::string& query);
    EnvObservation click(const std::string& target);

    /// Rendering of a results page for `query`, page numbers starting at 1.
    std::string render_results_page() const;
    std::string render_product_page() const;

private:
    enum class Page { search, results, product, done };

    std::vector<std::string> visible_targets() const;
    std::size_t page_count() const;

    std::shared_ptr<const Catalog> catalog_;
    TextMatch text_match_;
    ShoppingGoal goal_;
    Page page_ = Page::search;
    std::string query_;
    std::vector<const Product*> results_;
    std::size_t results_page_ = 1;
    const Product* product_ = nullptr;
    std::map<std::string, std::string> selected_;
    bool started_ = false;
};

/// Goal rendered as a task instruction, the initial observation adds the [Search] marker.
std::string initial_observation(const ShoppingGoal& goal);

}  // namespace gar::minishop
