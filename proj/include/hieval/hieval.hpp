#pragma once

#include "hieval/ad.hpp"
#include "hieval/baseline.hpp"
#include "hieval/commands.hpp"
#include "hieval/compare.hpp"
#include "hieval/csv.hpp"
#include "hieval/dataset.hpp"
#include "hieval/density.hpp"
#include "hieval/diagnostics.hpp"
#include "hieval/error.hpp"
#include "hieval/gradient.hpp"
#include "hieval/io.hpp"
#include "hieval/layout.hpp"
#include "hieval/modelspec.hpp"
#include "hieval/posterior.hpp"
#include "hieval/sampler.hpp"
#include "hieval/simulate.hpp"
#include "hieval/special.hpp"
#include "hieval/svg.hpp"
