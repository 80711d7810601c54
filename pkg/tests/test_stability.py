"""
Unit tests for stability certificates
"""

import math
from pathlib import Path

import pytest
from unittest.mock import patch
from django.test import SimpleTestCase

from frames.bounds import BoundsProvenance, FrameBounds
from frames.exceptions import PreconditionError
from frames.experiments import load_config, sweep_experiment
from frames.gabor import JitterPattern, generate_jitter
from frames.stability import (
    StabilityCertificate,
    Theorem,
    certify_bandlimited,
    certify_bspline,
    certify_compact_support,
    certify_nsgf_overlap,
    certify_wiener_amalgam,
    compare_with_prior_rect_condition,
    kadec_constant,
    nsgf_overlap_check,
    paley_wiener_certificate,
)
from frames.windows import Window


EXPERIMENTS_DIR = Path(__file__).resolve().parent.parent / 'experiments'


def rows_pattern(amplitude, rows=(-1, 0, 1), k=0):
    return JitterPattern({(n, k): amplitude for n in rows}, amplitude)


class TestPaleyWiener(SimpleTestCase):
    """Test class for paley_wiener_certificate and the Kadec constant"""

    @pytest.mark.timeout(30)
    def test_passes(self):
        """
        Test kind: unit_tests
        Original method: paley_wiener_certificate
        """
        cert = paley_wiener_certificate(1.0, 1.0, 0.0, 0.5)
        self.assertTrue(cert.passed)
        self.assertEqual(cert.margin, 0.5)
        self.assertEqual(cert.threshold, 1.0)
        self.assertAlmostEqual(cert.perturbed.A, 0.5)
        self.assertAlmostEqual(cert.perturbed.B, 1.5)
        self.assertEqual(cert.perturbed.provenance, BoundsProvenance.CERTIFIED_PERTURBED)

    @pytest.mark.timeout(30)
    def test_fails(self):
        """
        Test kind: unit_tests
        Original method: paley_wiener_certificate
        """
        cert = paley_wiener_certificate(4.0, 5.0, 0.5, 2.0)
        self.assertFalse(cert.passed)
        self.assertEqual(cert.margin, 1.5)
        self.assertIsNone(cert.perturbed)
        self.assertIsNone(cert.to_dict()['A_prime'])

    @pytest.mark.timeout(30)
    def test_boundary_fails(self):
        """
        Test kind: unit_tests
        Original method: paley_wiener_certificate
        """
        self.assertFalse(paley_wiener_certificate(1.0, 1.0, 0.5, 0.5).passed)

    @pytest.mark.timeout(30)
    def test_negative_constants(self):
        """
        Test kind: unit_tests
        Original method: paley_wiener_certificate
        """
        with self.assertRaises(PreconditionError):
            paley_wiener_certificate(1.0, 1.0, -0.1, 0.0)

    @pytest.mark.timeout(30)
    def test_kadec_constant(self):
        """
        Test kind: unit_tests
        Original method: kadec_constant
        """
        self.assertAlmostEqual(kadec_constant(1 / 8, 1), 0.18302, places=5)
        self.assertEqual(kadec_constant(0.0, 3), 0.0)

    @pytest.mark.timeout(30)
    @patch('frames.stability.logger')
    def test_kadec_out_of_range(self, mock_logger):
        """
        Test kind: unit_tests
        Original method: kadec_constant
        """
        kadec_constant(0.3, 1)
        mock_logger.warning.assert_called_once()
        self.assertIn('kadec_out_of_range', mock_logger.warning.call_args[0][0])

    @pytest.mark.timeout(30)
    def test_certificate_consistency(self):
        """
        Test kind: unit_tests
        Original method: StabilityCertificate
        """
        with self.assertRaises(PreconditionError):
            StabilityCertificate(Theorem.PALEY_WIENER, 0.1, 1.0, True, None)


class TestCompactSupport(SimpleTestCase):
    """Test class for certify_compact_support and certify_bspline"""

    def setUp(self):
        self.rect_bounds = FrameBounds(1.0, 1.0, BoundsProvenance.RECT_SPECIAL)

    @pytest.mark.timeout(30)
    def test_rect_rows(self):
        """
        Test kind: unit_tests
        Original method: certify_compact_support
        """
        cert = certify_compact_support(Window.rect(), 1.0, 1.0, self.rect_bounds, rows_pattern(1 / 48))
        self.assertEqual(cert.theorem, Theorem.THM1_COMPACT)
        self.assertAlmostEqual(cert.margin, 0.5)
        self.assertTrue(cert.passed)
        self.assertAlmostEqual(cert.perturbed.A, 0.29289, places=5)
        self.assertAlmostEqual(cert.perturbed.B, 1.70711, places=5)

    @pytest.mark.timeout(30)
    def test_hat_window_single_entry(self):
        """
        Test kind: unit_tests
        Original method: certify_compact_support
        """
        bounds = FrameBounds(1.0, 2.0, BoundsProvenance.PAINLESS, True)
        d = 0.1
        cert = certify_compact_support(Window.bspline(2), 1.0, 0.5, bounds, JitterPattern({(0, 0): d}, d))
        # ‖h - h(· - d)‖² = 2d² - |d|³ for the hat.
        expected = 4 * (2 * d ** 2 - d ** 3)
        self.assertAlmostEqual(cert.margin, expected, places=10)
        rho = math.sqrt(expected)
        self.assertAlmostEqual(cert.perturbed.A, 1 - rho)
        self.assertAlmostEqual(cert.perturbed.B, 2 * (1 + rho))

    @pytest.mark.timeout(30)
    def test_fails_for_large_jitter(self):
        """
        Test kind: unit_tests
        Original method: certify_compact_support
        """
        cert = certify_compact_support(Window.rect(), 1.0, 1.0, self.rect_bounds, rows_pattern(0.2))
        self.assertFalse(cert.passed)
        self.assertAlmostEqual(cert.margin, 4.8)

    @pytest.mark.timeout(30)
    def test_column_sums_use_worst_column(self):
        """
        Test kind: unit_tests
        Original method: certify_compact_support
        """
        pattern = JitterPattern({(0, 0): 0.01, (1, 0): 0.01, (0, 1): 0.03}, 0.03)
        cert = certify_compact_support(Window.rect(), 1.0, 1.0, self.rect_bounds, pattern)
        self.assertAlmostEqual(cert.margin, 4 * 2 * 0.03)

    @pytest.mark.timeout(30)
    def test_zero_jitter(self):
        """
        Test kind: unit_tests
        Original method: certify_compact_support
        """
        cert = certify_compact_support(Window.rect(), 1.0, 1.0, self.rect_bounds, JitterPattern.zero())
        self.assertEqual(cert.margin, 0.0)
        self.assertEqual((cert.perturbed.A, cert.perturbed.B), (1.0, 1.0))

    @pytest.mark.timeout(30)
    def test_preconditions(self):
        """
        Test kind: unit_tests
        Original method: certify_compact_support
        """
        with self.assertRaisesMessage(PreconditionError, 'non-summable column'):
            certify_compact_support(Window.rect(), 1.0, 1.0, self.rect_bounds,
                                    generate_jitter('column-constant', values={0: 0.01}))
        with self.assertRaisesMessage(PreconditionError, '0 < a <= c'):
            certify_compact_support(Window.rect(), 1.5, 0.5, self.rect_bounds, JitterPattern.zero())
        with self.assertRaisesMessage(PreconditionError, 'compactly supported'):
            certify_compact_support(Window.sinc(1), 1.0, 1.0, self.rect_bounds, JitterPattern.zero())

    @pytest.mark.timeout(30)
    def test_digest_is_stable(self):
        """
        Test kind: unit_tests
        Original method: certify_compact_support
        """
        first = certify_compact_support(Window.rect(), 1.0, 1.0, self.rect_bounds, rows_pattern(0.01))
        second = certify_compact_support(Window.rect(), 1.0, 1.0, self.rect_bounds, rows_pattern(0.01))
        third = certify_compact_support(Window.rect(), 1.0, 1.0, self.rect_bounds, rows_pattern(0.02))
        self.assertEqual(first.inputs_digest, second.inputs_digest)
        self.assertNotEqual(first.inputs_digest, third.inputs_digest)

    @pytest.mark.timeout(30)
    def test_bspline_certificate(self):
        """
        Test kind: unit_tests
        Original method: certify_bspline
        """
        bounds_p = FrameBounds(0.5, 2.0, BoundsProvenance.BSPLINE_RECURSION)
        pattern = JitterPattern({(0, 0): 1 / 64}, 1 / 64)
        cert = certify_bspline(Window.rect(), 2, 0.5, 1.0, bounds_p, pattern)
        self.assertEqual(cert.theorem, Theorem.COR_BSPLINE)
        # Shifts are scaled by a·p = 1, and ‖rect‖₁ = 1.
        self.assertAlmostEqual(cert.margin, 4 * 2 / 64)
        self.assertEqual(cert.extras['l1_factor'], 1.0)
        self.assertTrue(cert.passed)

    @pytest.mark.timeout(30)
    def test_first_order_matches_compact_support(self):
        """
        Test kind: unit_tests
        Original method: certify_bspline
        """
        for amplitude in (0.01, 0.2):
            pattern = rows_pattern(amplitude)
            spline = certify_bspline(Window.rect(), 1, 1.0, 1.0, self.rect_bounds, pattern)
            compact = certify_compact_support(Window.rect(), 1.0, 1.0, self.rect_bounds, pattern)
            self.assertEqual(spline.margin, compact.margin)
            self.assertEqual(spline.threshold, compact.threshold)
            self.assertEqual(spline.passed, compact.passed)
            if compact.passed:
                self.assertEqual((spline.perturbed.A, spline.perturbed.B),
                                 (compact.perturbed.A, compact.perturbed.B))

    @pytest.mark.timeout(30)
    def test_prior_rect_condition(self):
        """
        Test kind: unit_tests
        Original method: compare_with_prior_rect_condition
        """
        pattern = JitterPattern({(0, 0): 0.1, (1, 1): 0.1}, 0.1)
        result = compare_with_prior_rect_condition(1.0, 1.0, 1.0, pattern)
        self.assertAlmostEqual(result['current'], 0.4)
        self.assertAlmostEqual(result['prior'], 0.8)
        self.assertTrue(result['improves'])


class TestWienerAmalgam(SimpleTestCase):
    """Test class for certify_wiener_amalgam"""

    @pytest.mark.timeout(60)
    def test_hat_window(self):
        """
        Test kind: unit_tests
        Original method: certify_wiener_amalgam
        """
        bounds = FrameBounds(1.0, 2.0, BoundsProvenance.PAINLESS, True)
        pattern = generate_jitter('geometric-in-n', peak=0.1, ratio=0.5)
        cert = certify_wiener_amalgam(Window.bspline(2), 1.0, 0.5, bounds, pattern)
        self.assertAlmostEqual(cert.extras['derivative_amalgam_norm'], 3.0)
        self.assertAlmostEqual(cert.margin, 0.42426, places=5)
        self.assertEqual(cert.threshold, 1.0)
        self.assertAlmostEqual(cert.perturbed.A, 0.57574, places=5)
        self.assertAlmostEqual(cert.perturbed.B, 2.84853, places=5)

    @pytest.mark.timeout(30)
    def test_discontinuous_window(self):
        """
        Test kind: unit_tests
        Original method: certify_wiener_amalgam
        """
        bounds = FrameBounds(1.0, 1.0, BoundsProvenance.RECT_SPECIAL)
        with self.assertRaisesMessage(PreconditionError, 'distributional derivative'):
            certify_wiener_amalgam(Window.rect(), 1.0, 1.0, bounds, JitterPattern.zero())

    @pytest.mark.timeout(60)
    def test_zero_jitter(self):
        """
        Test kind: unit_tests
        Original method: certify_wiener_amalgam
        """
        bounds = FrameBounds(1.0, 2.0, BoundsProvenance.PAINLESS, True)
        cert = certify_wiener_amalgam(Window.bspline(2), 1.0, 0.5, bounds, JitterPattern.zero())
        self.assertEqual(cert.margin, 0.0)
        self.assertTrue(cert.passed)
        self.assertEqual((cert.perturbed.A, cert.perturbed.B), (1.0, 2.0))


class TestBandlimited(SimpleTestCase):
    """Test class for certify_bandlimited"""

    def setUp(self):
        self.bounds = FrameBounds(1.0, 1.0, BoundsProvenance.EXPLICIT)

    @pytest.mark.timeout(30)
    def test_single_row(self):
        """
        Test kind: unit_tests
        Original method: certify_bandlimited
        """
        pattern = JitterPattern({(0, 0): 1 / 16, (0, 3): -1 / 32}, 1 / 16)
        cert = certify_bandlimited(Window.sinc(1), 1.0, 1.0, self.bounds, pattern)
        self.assertAlmostEqual(cert.margin, 0.18302, places=5)
        self.assertTrue(cert.passed)
        self.assertAlmostEqual(cert.extras['lemma_form_margin'], kadec_constant(1 / 16, 1))
        self.assertAlmostEqual(cert.extras['simplified_margin'], 1 / 16 / math.sqrt(math.pi))

    @pytest.mark.timeout(30)
    def test_jitter_too_large(self):
        """
        Test kind: unit_tests
        Original method: certify_bandlimited
        """
        with self.assertRaisesMessage(PreconditionError, 'not below 1/(4M)'):
            certify_bandlimited(Window.sinc(1), 1.0, 1.0, self.bounds, JitterPattern({(0, 0): 0.3}, 0.3))

    @pytest.mark.timeout(30)
    def test_missing_band_limit(self):
        """
        Test kind: unit_tests
        Original method: certify_bandlimited
        """
        with self.assertRaisesMessage(PreconditionError, 'missing band_limit metadata'):
            certify_bandlimited(Window.rect(), 1.0, 1.0, self.bounds, JitterPattern.zero())

    @pytest.mark.timeout(30)
    def test_zero_jitter(self):
        """
        Test kind: unit_tests
        Original method: certify_bandlimited
        """
        cert = certify_bandlimited(Window.sinc(1), 1.0, 1.0, self.bounds, JitterPattern.zero())
        self.assertEqual(cert.margin, 0.0)
        self.assertTrue(cert.passed)
        self.assertEqual((cert.perturbed.A, cert.perturbed.B), (1.0, 1.0))


class TestNsgfOverlap(SimpleTestCase):
    """Test class for the painless overlap condition"""

    @pytest.mark.timeout(30)
    def test_constant_shift(self):
        """
        Test kind: unit_tests
        Original method: nsgf_overlap_check
        """
        check = nsgf_overlap_check(1.0, 1.0, {k: 0.2 for k in range(-3, 4)})
        self.assertTrue(check.holds)
        self.assertIsNone(check.witness)

    @pytest.mark.timeout(30)
    def test_tight_lattice_witness(self):
        """
        Test kind: unit_tests
        Original method: nsgf_overlap_check
        """
        check = nsgf_overlap_check(1.0, 1.0, {0: 0.0, 1: 0.1})
        self.assertFalse(check.holds)
        self.assertEqual(check.witness, 0)
        self.assertEqual(check.threshold, 0.0)

    @pytest.mark.timeout(30)
    def test_redundant_lattice(self):
        """
        Test kind: unit_tests
        Original method: nsgf_overlap_check
        """
        check = nsgf_overlap_check(1.0, 0.5, {0: 0.0, 1: 0.9})
        self.assertTrue(check.holds)
        self.assertAlmostEqual(check.max_step, 0.9)

    @pytest.mark.timeout(30)
    def test_contiguous_columns(self):
        """
        Test kind: unit_tests
        Original method: nsgf_overlap_check
        """
        with self.assertRaisesMessage(PreconditionError, 'contiguous'):
            nsgf_overlap_check(1.0, 0.5, {0: 0.0, 2: 0.1})

    @pytest.mark.timeout(60)
    def test_certificate_bounds(self):
        """
        Test kind: unit_tests
        Original method: certify_nsgf_overlap
        """
        cert = certify_nsgf_overlap(Window.rect(), 0.5, 1.0, {1: 0.9})
        self.assertTrue(cert.passed)
        self.assertAlmostEqual(cert.perturbed.A, 1.0)
        self.assertAlmostEqual(cert.perturbed.B, 3.0)
        self.assertTrue(cert.perturbed.optimal)

    @pytest.mark.timeout(30)
    def test_certificate_checks_padding(self):
        """
        Test kind: unit_tests
        Original method: certify_nsgf_overlap
        """
        cert = certify_nsgf_overlap(Window.rect(), 1.0, 1.0, {0: 0.1})
        self.assertFalse(cert.passed)
        self.assertEqual(cert.extras['overlap']['witness'], -1)

    @pytest.mark.timeout(60)
    def test_certificate_passes_at_threshold(self):
        """
        Test kind: unit_tests
        Original method: certify_nsgf_overlap
        """
        cert = certify_nsgf_overlap(Window.rect(), 0.5, 1.0, {1: 1.0})
        self.assertEqual(cert.margin, cert.threshold)
        self.assertTrue(cert.passed)
        self.assertTrue(cert.extras['covering'])
        self.assertAlmostEqual(cert.perturbed.A, 1.0)
        self.assertAlmostEqual(cert.perturbed.B, 3.0)

    @pytest.mark.timeout(60)
    def test_covering_failure_reported_separately(self):
        """
        Test kind: unit_tests
        Original method: certify_nsgf_overlap
        """
        cert = certify_nsgf_overlap(Window.bspline(2), 1.0, 0.5, {1: 1.0})
        self.assertTrue(cert.extras['overlap']['holds'])
        self.assertLessEqual(cert.margin, cert.threshold)
        self.assertFalse(cert.extras['covering'])
        self.assertFalse(cert.passed)
        self.assertIsNone(cert.perturbed)


class TestCertificateSweeps(SimpleTestCase):
    """Test class for certificates swept over the jitter amplitude"""

    @pytest.mark.timeout(120)
    def test_margin_grows_with_amplitude(self):
        """
        Test kind: unit_tests
        Original method: sweep_experiment
        """
        config = load_config(EXPERIMENTS_DIR / 'sweep-jitter.json')
        report = sweep_experiment(config, 'jitter-amplitude', [0, '1/400', '1/200', '1/100', '1/50'],
                                  theorem='thm1-compact', seed=11)
        rows = report.results[0].result['rows']
        self.assertTrue(all('error' not in row for row in rows))
        margins = [row['margin'] for row in rows]
        self.assertEqual(margins[0], 0.0)
        self.assertTrue(all(x < y for x, y in zip(margins, margins[1:])))
        passed = [row['passed'] for row in rows]
        self.assertEqual(passed, sorted(passed, reverse=True))
