#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rocgan {

// Violated precondition on shapes, ranks or geometry.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Mathematical domain violation (log of non-positive value and the like).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Unreadable, malformed or truncated file content.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid experiment configuration; `field()` is a JSON-pointer-like path.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& what)
        : std::runtime_error(what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// A loss or gradient became non-finite during training.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(std::string term, std::uint64_t seed, const std::string& what)
        : std::runtime_error(what), term_(std::move(term)), seed_(seed) {}
    const std::string& term() const noexcept { return term_; }
    std::uint64_t seed() const noexcept { return seed_; }

private:
    std::string term_;
    std::uint64_t seed_;
};

}  // namespace rocgan
