// Copyright (C) 2026 The ERASE Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace erase {

/// Base of every error thrown by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller supplied data that violates an operation's precondition.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// Unknown identifier (model id, layer, ...).
class LookupError : public Error {
public:
    using Error::Error;
};

/// An attention source could not serve a request.
class ProviderError : public Error {
public:
    using Error::Error;
};

/// File could not be read, written or decoded.
class IoError : public Error {
public:
    using Error::Error;
};

/// An operation would leave a model in an inconsistent state.
class InvalidState : public Error {
public:
    using Error::Error;
};

}  // namespace erase
