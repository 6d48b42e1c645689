// Umbrella header.
#pragma once

#include "cohgraph/common.hpp"
#include "cohgraph/series.hpp"
#include "cohgraph/kernels.hpp"
#include "cohgraph/spectral.hpp"
#include "cohgraph/prewhiten.hpp"
#include "cohgraph/inverse.hpp"
#include "cohgraph/coherence.hpp"
#include "cohgraph/testing.hpp"
#include "cohgraph/pipeline.hpp"
#include "cohgraph/simulate.hpp"
#include "cohgraph/io.hpp"
