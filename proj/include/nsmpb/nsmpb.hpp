#pragma once

// Umbrella header for the full library.

#include "nsmpb/config.hpp"
#include "nsmpb/constants.hpp"
#include "nsmpb/core.hpp"
#include "nsmpb/csr.hpp"
#include "nsmpb/fem.hpp"
#include "nsmpb/gmres.hpp"
#include "nsmpb/ilu.hpp"
#include "nsmpb/kernels.hpp"
#include "nsmpb/mesh.hpp"
#include "nsmpb/molecule.hpp"
#include "nsmpb/post.hpp"
#include "nsmpb/report.hpp"
#include "nsmpb/solvent.hpp"
#include "nsmpb/solver.hpp"
