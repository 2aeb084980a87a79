#pragma once

#include <stdexcept>
#include <string>

namespace f2gnn {

// Base class for all errors raised by the library. Subclasses exist so
// callers (and the CLI) can report a named error class.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual const char* name() const noexcept { return "Error"; }
};

#define F2GNN_DEFINE_ERROR(cls)                                              \
    class cls : public Error {                                               \
    public:                                                                  \
        explicit cls(const std::string& what) : Error(what) {}               \
        const char* name() const noexcept override { return #cls; }          \
    }

F2GNN_DEFINE_ERROR(GraphError);
F2GNN_DEFINE_ERROR(EmptyEdgeSet);
F2GNN_DEFINE_ERROR(InsufficientNodes);
F2GNN_DEFINE_ERROR(EmptyClient);
F2GNN_DEFINE_ERROR(ShapeMismatch);
F2GNN_DEFINE_ERROR(ZeroVariance);
F2GNN_DEFINE_ERROR(EmptyGroup);
F2GNN_DEFINE_ERROR(ZeroSigma);
F2GNN_DEFINE_ERROR(NonFinite);
F2GNN_DEFINE_ERROR(UnrealizableD);
F2GNN_DEFINE_ERROR(ParseError);
F2GNN_DEFINE_ERROR(ValidationError);
F2GNN_DEFINE_ERROR(FormatError);
F2GNN_DEFINE_ERROR(BinaryViolation);
F2GNN_DEFINE_ERROR(IoError);

#undef F2GNN_DEFINE_ERROR

}  // namespace f2gnn
