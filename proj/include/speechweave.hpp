// include/speechweave.hpp

// Copyright 2026  The speechweave Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "speechweave/error.hpp"
#include "speechweave/utf8.hpp"
#include "speechweave/seed.hpp"
#include "speechweave/token_codec.hpp"
#include "speechweave/ctc_align.hpp"
#include "speechweave/chunker.hpp"
#include "speechweave/interleave.hpp"
#include "speechweave/duration_model.hpp"
#include "speechweave/stream_scheduler.hpp"
#include "speechweave/eval_metrics.hpp"
#include "speechweave/corpus_io.hpp"
#include "speechweave/pipeline.hpp"
