#pragma once

#include <stdexcept>
#include <string>

namespace wadkit {

/// Base of every error raised by the library. `category()` maps onto the
/// CLI exit codes (2 usage, 3 missing input, 4 numerical failure, 1 other).
class Error : public std::runtime_error {
public:
    enum class Category { usage, missing_input, numerical, format, other };

    Error(Category c, const std::string& what) : std::runtime_error(what), category_(c) {}

    Category category() const noexcept { return category_; }

private:
    Category category_;
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error(Category::usage, what) {}
};

class MissingInputError : public Error {
public:
    explicit MissingInputError(const std::string& what) : Error(Category::missing_input, what) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(Category::numerical, what) {}
};

class FormatError : public Error {
public:
    explicit FormatError(const std::string& what) : Error(Category::format, what) {}
};

inline int exit_code_for(const Error& e) {
    switch (e.category()) {
        case Error::Category::usage: return 2;
        case Error::Category::missing_input: return 3;
        case Error::Category::numerical: return 4;
        default: return 1;
    }
}

}  // namespace wadkit
