// Copyright 2026 The FlowZero Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Core library. The HTTP client and the renderer pull in OpenSSL and
// OpenCV respectively and are included separately.

#include "flowzero/bench.hpp"
#include "flowzero/bench_case.hpp"
#include "flowzero/bundle.hpp"
#include "flowzero/dss.hpp"
#include "flowzero/error.hpp"
#include "flowzero/fft.hpp"
#include "flowzero/io.hpp"
#include "flowzero/llm.hpp"
#include "flowzero/mns.hpp"
#include "flowzero/refine.hpp"
#include "flowzero/verify.hpp"
