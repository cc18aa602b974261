#pragma once

#include "facelock/core.hpp"
#include "facelock/autodiff.hpp"
#include "facelock/resample.hpp"
#include "facelock/image_io.hpp"
#include "facelock/backends.hpp"
#include "facelock/toy_backend.hpp"
#include "facelock/real_backend.hpp"
#include "facelock/attacks.hpp"
#include "facelock/metrics.hpp"
#include "facelock/purification.hpp"
#include "facelock/harness/catalog.hpp"
#include "facelock/harness/config.hpp"
#include "facelock/harness/records.hpp"
#include "facelock/harness/report.hpp"
#include "facelock/harness/pipeline.hpp"
