#pragma once

#include <stdexcept>
#include <string>

namespace limclust {

// Error taxonomy shared by the library and the CLI exit-code mapping.
class Error : public std::runtime_error {
public:
    enum class Kind {
        Input,      // malformed or out-of-range input
        Domain,     // operation undefined for this value (e.g. zero-measure induce)
        Parse,      // formula / file syntax error
        Locality,   // unguarded quantifier or locality violation
        Algebra,    // weak-algebra precondition failed
    };

    Error(Kind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}

    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

inline Error input_error(std::string msg) { return Error(Error::Kind::Input, std::move(msg)); }
inline Error domain_error(std::string msg) { return Error(Error::Kind::Domain, std::move(msg)); }
inline Error parse_error(std::string msg) { return Error(Error::Kind::Parse, std::move(msg)); }
inline Error locality_error(std::string msg) { return Error(Error::Kind::Locality, std::move(msg)); }
inline Error algebra_error(std::string msg) { return Error(Error::Kind::Algebra, std::move(msg)); }

} // namespace limclust
