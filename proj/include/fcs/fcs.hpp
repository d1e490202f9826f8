#ifndef FCS_FCS_HPP
#define FCS_FCS_HPP

#include "fcs/aft_model.hpp"
#include "fcs/bfgs.hpp"
#include "fcs/causal.hpp"
#include "fcs/error.hpp"
#include "fcs/faft.hpp"
#include "fcs/fpca.hpp"
#include "fcs/io.hpp"
#include "fcs/linalg.hpp"
#include "fcs/parallel.hpp"
#include "fcs/random.hpp"
#include "fcs/sim.hpp"
#include "fcs/survival.hpp"
#include "fcs/weights.hpp"

#endif  // FCS_FCS_HPP
