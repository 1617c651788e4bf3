#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mvi {

enum class Errc {
    MissingHeader,
    UnparsableCell,
    EmptyCell,
    FractionSumInvalid,
    MissingParams,
    InvalidSpec,
    InvalidRate,
    TooFewColumns,
    IncompleteInput,
    AllMissingColumn,
    NoCompleteRows,
    NoDonors,
    SingularSystem,
    EmptyCompleteSet,
    BudgetTooSmall,
    ShapeMismatch,
    EmptyInput,
    UntrainedModel,
    ConstantColumn,
    EmptySelection,
    ParseError,
    UnknownKey,
    InvalidValue,
    DataSourceUnavailable,
    IoError,
    NominalColumn,
    UnknownSortColumn,
    NonNumericColumn,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace mvi
