#pragma once

#include "hgeo/errors.hpp"
#include "hgeo/rng.hpp"
#include "hgeo/tree.hpp"
#include "hgeo/haar.hpp"
#include "hgeo/eigensystem.hpp"
#include "hgeo/kernel.hpp"
#include "hgeo/spectra.hpp"
#include "hgeo/cooccur.hpp"
#include "hgeo/hierarchy.hpp"
#include "hgeo/fitkernel.hpp"
#include "hgeo/concept.hpp"
#include "hgeo/experiment.hpp"
