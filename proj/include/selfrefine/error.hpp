#pragma once

#include <stdexcept>
#include <string>

namespace selfrefine {

// Stable error taxonomy. Codes map 1:1 onto the C API's sr_status values,
// so keep the numbering in sync with include/selfrefine.h.
enum class ErrorCode {
    Ok = 0,
    InvalidArgument = 1,
    Template = 2,
    Parse = 3,
    UnparseableVerdict = 4,
    Auth = 5,
    Transport = 6,
    Protocol = 7,
    Cache = 8,
    Extraction = 9,
    Domain = 10,
    Io = 11,
    Config = 12,
    Internal = 13,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline Error invalid_argument_error(const std::string& what) { return Error(ErrorCode::InvalidArgument, what); }
inline Error template_error(const std::string& what) { return Error(ErrorCode::Template, what); }
inline Error parse_error(const std::string& what) { return Error(ErrorCode::Parse, what); }
inline Error auth_error(const std::string& what) { return Error(ErrorCode::Auth, what); }
inline Error transport_error(const std::string& what) { return Error(ErrorCode::Transport, what); }
inline Error protocol_error(const std::string& what) { return Error(ErrorCode::Protocol, what); }
inline Error cache_error(const std::string& what) { return Error(ErrorCode::Cache, what); }
inline Error extraction_error(const std::string& what) { return Error(ErrorCode::Extraction, what); }
inline Error domain_error(const std::string& what) { return Error(ErrorCode::Domain, what); }
inline Error io_error(const std::string& what) { return Error(ErrorCode::Io, what); }
inline Error config_error(const std::string& what) { return Error(ErrorCode::Config, what); }

} // namespace selfrefine
