#ifndef CONFOR_ERRORS_HPP
#define CONFOR_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace confor {

// 1/y reweighting (or a sample total) makes the requested measure non-normalizable.
class non_integrable_error : public std::domain_error {
public:
    explicit non_integrable_error(const std::string& what) : std::domain_error(what) {}
};

// Expected loss does not exist for the requested family/margin pair.
class undefined_risk_error : public std::domain_error {
public:
    explicit undefined_risk_error(const std::string& what) : std::domain_error(what) {}
};

// Lagrange multiplier outside the feasible interval of the loss family.
class infeasible_multiplier_error : public std::domain_error {
public:
    explicit infeasible_multiplier_error(const std::string& what) : std::domain_error(what) {}
};

// A pointwise loss evaluation hit an invalid outcome (e.g. APE at y = 0).
class pointwise_loss_error : public std::domain_error {
public:
    pointwise_loss_error(const std::string& what, std::size_t dimension)
        : std::domain_error(what), dimension_(dimension) {}
    std::size_t dimension() const noexcept { return dimension_; }

private:
    std::size_t dimension_;
};

}  // namespace confor

#endif
