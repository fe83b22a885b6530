#pragma once

// Umbrella header for the retina-kit exudate screening library.

#include "retina/binarize.hpp"
#include "retina/color.hpp"
#include "retina/diffusion.hpp"
#include "retina/evalharness.hpp"
#include "retina/features.hpp"
#include "retina/image_io.hpp"
#include "retina/logging.hpp"
#include "retina/morphology.hpp"
#include "retina/npy_io.hpp"
#include "retina/phantom.hpp"
#include "retina/pipeline.hpp"
#include "retina/regions.hpp"
#include "retina/resize.hpp"
#include "retina/scalespace.hpp"
#include "retina/severity.hpp"
#include "retina/svm.hpp"
#include "retina/types.hpp"
