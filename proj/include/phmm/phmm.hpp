#pragma once

#include "phmm/core.hpp"
#include "phmm/random.hpp"
#include "phmm/emission.hpp"
#include "phmm/chain.hpp"
#include "phmm/forward_backward.hpp"
#include "phmm/mh.hpp"
#include "phmm/model.hpp"
#include "phmm/posterior.hpp"
#include "phmm/sampler.hpp"
#include "phmm/selection.hpp"
#include "phmm/simulate.hpp"
#include "phmm/io.hpp"
#include "phmm/run.hpp"
