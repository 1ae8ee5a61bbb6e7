#pragma once

#include <doctest.h>

#include "tack/error.hpp"

namespace testing {

// Code of the tack::Error thrown by f.
inline tack::ErrorCode code_of(auto&& f) {
    try {
        f();
    } catch (const tack::Error& e) {
        return e.code();
    }
    FAIL("no tack::Error thrown");
    return tack::ErrorCode::IoError;
}

} // namespace testing
