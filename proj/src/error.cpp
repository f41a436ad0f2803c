#include "ropelab/error.hpp"

namespace ropelab {

const char* error_kind_name(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::TooFewPoints: return "TooFewPoints";
    case ErrorKind::DegenerateFit: return "DegenerateFit";
    case ErrorKind::NonPositiveContext: return "NonPositiveContext";
    case ErrorKind::MissingTag: return "MissingTag";
    case ErrorKind::UnbalancedTag: return "UnbalancedTag";
    case ErrorKind::EmptyField: return "EmptyField";
    case ErrorKind::BudgetTooSmall: return "BudgetTooSmall";
    case ErrorKind::InstanceTooLong: return "InstanceTooLong";
    case ErrorKind::Io: return "IoError";
    }
    return "Error";
}

} // namespace ropelab
